import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from arc_robust.aggregation import AggregatorSpec
from arc_robust.attacks import AttackSpec
from arc_robust.data import Dataset, synth_generate
from arc_robust.errors import ConfigError, DimensionMismatch, UnknownLipschitz
from arc_robust.models import Logistic
from arc_robust.numkit import rng_stream
from arc_robust.trainer import (
    MetricsLog,
    ModelState,
    StepRecord,
    TrainingConfig,
    compute_momentum,
    estimate_gb,
    evaluate,
    max_grad_growth_check,
    run,
    worst_case_max_accuracy,
)


def small_data(seed=0):
    train = synth_generate(4, 6, 20, 0.3, rng_stream(seed, 1))
    test = synth_generate(4, 6, 10, 0.3, rng_stream(seed, 7))
    return train, test


def fake_log(accs):
    log = MetricsLog("FOE", "cwtm", 1)
    log.records = [StepRecord(i + 1, a, a, 0.0, None, 0.0, 0.0, 0.0) for i, a in enumerate(accs)]
    return log


def test_momentum_examples():
    assert np.array_equal(compute_momentum([3.0], [7.0], 0.0), [3.0])
    assert compute_momentum([1.0], [10.0], 0.9)[0] == pytest.approx(9.1, abs=1e-15)
    assert np.array_equal(compute_momentum([2.0, -1.0], [2.0, -1.0], 0.5), [2.0, -1.0])
    with pytest.raises(ValueError):
        compute_momentum([1.0], [1.0], 1.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainingConfig(n=4, f=2, attack=AttackSpec.named("SF"))
    with pytest.raises(ConfigError):
        TrainingConfig(f=1, attack=None)
    with pytest.raises(ConfigError):
        TrainingConfig(n=5, f=0, attack=AttackSpec.named("SF"))
    with pytest.raises(ConfigError):
        TrainingConfig(f=0, lr=0.0)
    with pytest.raises(ConfigError):
        TrainingConfig(f=0, init_scale=0.5)


def test_gradient_descent_contracts_on_quadratic():
    cfg = TrainingConfig(
        n=5, f=0, steps=50, lr=0.5, momentum=0.0, batch_size=0,
        aggregator=AggregatorSpec.parse("mean"), model="quadratic", quad_L=1.0,
    )
    log = run(cfg)
    assert log.records[-1].full_grad_norm < log.records[0].full_grad_norm
    assert len(log.records) == 50 and all(r.clip_threshold is None for r in log.records)


def test_run_is_deterministic():
    train, test = small_data()
    cfg = TrainingConfig(n=6, f=1, steps=15, attack=AttackSpec.named("ALIE"),
                         aggregator=AggregatorSpec.parse("cwtm+nnm+arc"), batch_size=5)
    a, b = run(cfg, train, test), run(cfg, train, test)
    assert a == b


@pytest.mark.parametrize("attack", ["SF", "LF", "mimic", "FOE", "ALIE"])
def test_every_attack_runs(attack):
    train, test = small_data()
    cfg = TrainingConfig(n=5, f=1, steps=6, attack=AttackSpec.named(attack),
                         aggregator=AggregatorSpec.parse("cwtm+nnm+arc"), batch_size=4,
                         heterogeneity="dirichlet", alpha=1.0)
    log = run(cfg, train, test)
    assert len(log.records) == 6 and not log.failed
    assert all(r.clip_threshold is not None for r in log.records)
    assert 0.0 <= log.max_test_accuracy() <= 1.0
    assert 1 <= log.theta_hat_step <= 6


def test_f_zero_arc_matches_unclipped():
    train, test = small_data(2)
    base = TrainingConfig(n=5, f=0, steps=20, aggregator=AggregatorSpec.parse("cwtm+nnm"), batch_size=4)
    clipped = replace(base, aggregator=AggregatorSpec.parse("cwtm+nnm+arc"))
    a, b = run(base, train, test), run(clipped, train, test)
    for ra, rb in zip(a.records, b.records):
        assert (ra.loss, ra.test_acc, ra.full_grad_norm) == (rb.loss, rb.test_acc, rb.full_grad_norm)
        assert ra.clip_threshold is None and rb.clip_threshold is not None


def test_divergence_is_recorded_not_raised():
    cfg = TrainingConfig(n=3, f=1, steps=400, lr=50.0, momentum=0.0, batch_size=0,
                         aggregator=AggregatorSpec.parse("mean"), attack=AttackSpec(
                             AttackSpec.named("FOE").kind, tau_grid=(4.0,)),
                         model="quadratic", quad_L=1.0)
    log = run(cfg)
    assert log.failed and len(log.records) < 400


def test_evaluate_examples():
    data = Dataset(np.array([[1.0], [2.0], [3.0], [4.0]]), np.array([0, 1, 0, 1]), 2)
    model = Logistic(2, 1, 0.0)
    theta = np.array([0.0, 0.0, 1.0, 0.0])  # constant prediction: class 0
    assert evaluate(ModelState(theta, model), data) == 0.5
    with pytest.raises(ValueError):
        evaluate(ModelState(theta, model), data.subset([]))
    with pytest.raises(DimensionMismatch):
        evaluate(ModelState(np.zeros(6), Logistic(2, 2)), data)


def test_worst_case_max_accuracy():
    assert worst_case_max_accuracy({"SF": fake_log([0.1, 0.7, 0.3])}) == 0.7
    assert worst_case_max_accuracy({"SF": fake_log([0.9]), "FOE": fake_log([0.2, 0.4])}) == 0.4
    logs = {k: fake_log([0.5, 0.6]) for k in "abcde"}
    assert worst_case_max_accuracy(logs) == 0.6


def test_estimate_gb_examples():
    same = [np.tile([1.0, 2.0], (3, 1))] * 4
    assert all(g == 0.0 for g in estimate_gb(same).values())
    v = np.array([3.0, 4.0])
    assert estimate_gb([np.vstack([v, -v])])[0.0] == pytest.approx(5.0, abs=1e-12)


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 4), st.integers(1, 3)),
                  elements=st.floats(-10, 10)))
def test_estimate_gb_certifies_trajectory(traj):
    for B, G in estimate_gb(list(traj)).items():
        for g in traj:
            g_h = g.mean(axis=0)
            diss = ((g - g_h) ** 2).sum(axis=1).mean()
            assert diss <= G * G + B * B * (g_h @ g_h) + 1e-9 * (1 + diss)


def test_growth_check_passes_on_arc_quadratic():
    cfg = TrainingConfig(n=7, f=1, steps=60, lr=0.5, momentum=0.0, batch_size=0,
                         aggregator=AggregatorSpec.parse("cwtm+nnm+arc+wlog"),
                         attack=AttackSpec.named("FOE"), model="quadratic", quad_L=1.0)
    log = run(cfg)
    report = max_grad_growth_check(log)
    assert report.passed and report.bound == 1.5


def test_growth_check_zero_step_and_failures():
    cfg = TrainingConfig(n=5, f=0, steps=5, lr=1e-300, momentum=0.0, batch_size=0,
                         aggregator=AggregatorSpec.parse("mean"), model="quadratic")
    assert max_grad_growth_check(run(cfg), gamma=0.0).passed
    log = fake_log([0.1, 0.2])
    log.model_kind, log.lipschitz, log.lr = "quadratic", 1.0, 0.1
    log.records[0].max_honest_grad_norm, log.records[1].max_honest_grad_norm = 1.0, 2.0
    report = max_grad_growth_check(log)
    assert not report.passed and report.first_violation_step == 2
    with pytest.raises(UnknownLipschitz):
        max_grad_growth_check(fake_log([0.5]))


def test_metrics_log_summary_fields():
    log = fake_log([0.25, 0.5])
    s = log.summary()
    assert s["max_test_accuracy"] == 0.5 and s["steps_recorded"] == 2
    assert math.isnan(fake_log([]).max_test_accuracy())
