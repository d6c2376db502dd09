import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from arc_robust.aggregation import build_pipeline
from arc_robust.attacks import (
    DEFAULT_ALIE_GRID,
    DEFAULT_FOE_GRID,
    AttackContext,
    AttackKind,
    AttackSpec,
    coordinate_std,
    craft,
    flip_labels,
    mimic_scores,
    mimic_select,
    parse_attack,
)
from arc_robust.errors import EmptyGrid, LabelOutOfRange, NoHonestWorkers


def ctx_for(honest, spec="cwtm+nnm", f=1):
    return AttackContext(np.asarray(honest, dtype=float), build_pipeline(spec), f)


HONEST = np.array([[1.0, 2.0], [2.0, 0.5], [0.0, 1.0], [1.5, 1.5], [3.0, -1.0]])


def test_sign_flip():
    assert np.array_equal(craft(AttackSpec(AttackKind.SF), ctx_for(np.ones((3, 2)))), [-1.0, -1.0])


def test_foe_at_two_is_sign_flip():
    foe = craft(AttackSpec(AttackKind.FOE, tau_grid=(2.0,)), ctx_for(HONEST))
    sf = craft(AttackSpec(AttackKind.SF), ctx_for(HONEST))
    assert np.allclose(foe, sf, rtol=0, atol=1e-15)


def test_alie_at_zero_is_honest_mean():
    out = craft(AttackSpec(AttackKind.ALIE, tau_grid=(0.0,)), ctx_for(HONEST))
    assert np.array_equal(out, HONEST.mean(axis=0))


def test_mimic_copies_target():
    out = craft(AttackSpec(AttackKind.MIMIC, mimic_target=3), ctx_for(HONEST))
    assert np.array_equal(out, HONEST[3])
    with pytest.raises(NoHonestWorkers):
        craft(AttackSpec(AttackKind.MIMIC, mimic_target=9), ctx_for(HONEST))


@pytest.mark.parametrize("kind", [AttackKind.FOE, AttackKind.ALIE])
@pytest.mark.parametrize("spec", ["mean", "cwtm+nnm", "cwtm+nnm+arc", "gm+nnm"])
def test_adaptive_factor_matches_grid_replay(kind, spec):
    pipeline = build_pipeline(spec)
    ctx = ctx_for(HONEST, spec)
    attack = AttackSpec(kind)
    v = craft(attack, ctx)
    m_bar = HONEST.mean(axis=0)
    sigma = HONEST.std(axis=0, ddof=1)
    best, best_tau = -1.0, None
    for tau in attack.tau_grid:
        cand = (1 - tau) * m_bar if kind is AttackKind.FOE else m_bar + tau * sigma
        dmg = np.linalg.norm(m_bar - pipeline(np.vstack([HONEST, cand]), 1))
        if dmg > best:
            best, best_tau = dmg, tau
    assert ctx.chosen_tau == best_tau
    expected = (1 - best_tau) * m_bar if kind is AttackKind.FOE else m_bar + best_tau * sigma
    assert np.allclose(v, expected, rtol=0, atol=1e-12)


def test_default_grids():
    assert DEFAULT_FOE_GRID[0] == 0 and DEFAULT_FOE_GRID[-1] == 4.0 and 2.0 in DEFAULT_FOE_GRID
    assert len(DEFAULT_ALIE_GRID) == 41 and DEFAULT_ALIE_GRID[-1] == 2.0


def test_empty_grid_and_missing_honest():
    with pytest.raises(EmptyGrid):
        AttackSpec(AttackKind.FOE, tau_grid=(-1.0,))
    spec = AttackSpec(AttackKind.FOE)
    object.__setattr__(spec, "tau_grid", ())
    with pytest.raises(EmptyGrid):
        craft(spec, ctx_for(HONEST))
    with pytest.raises(NoHonestWorkers):
        craft(AttackSpec(AttackKind.SF), ctx_for(np.empty((0, 2))))


def test_label_flip_not_crafted():
    with pytest.raises(ValueError):
        craft(AttackSpec(AttackKind.LF), ctx_for(HONEST))


def test_coordinate_std_single_worker_is_zero():
    assert np.array_equal(coordinate_std(np.array([[1.0, 5.0]])), [0.0, 0.0])


def test_parse_attack_names():
    assert parse_attack("foe") is AttackKind.FOE and parse_attack("Mimic") is AttackKind.MIMIC
    with pytest.raises(ValueError):
        parse_attack("gaussian")


def test_flip_labels_examples():
    assert flip_labels([0], 10).tolist() == [9]
    assert flip_labels([9], 10).tolist() == [0]
    assert flip_labels([0, 1, 1], 2).tolist() == [1, 0, 0]
    with pytest.raises(LabelOutOfRange):
        flip_labels([10], 10)


@given(st.integers(2, 12), st.data())
def test_flip_labels_involution(K, data):
    y = np.array(data.draw(st.lists(st.integers(0, K - 1), max_size=30)), dtype=np.int64)
    assert np.array_equal(flip_labels(flip_labels(y, K), K), y)


def test_mimic_select_examples():
    assert mimic_select([np.array([[1.0, 2.0]])]) == 0
    base = np.zeros((4, 3))
    history = []
    for _ in range(5):
        m = base.copy()
        m[2] += 1.0
        history.append(m)
    assert mimic_select(history) == 2


def test_mimic_select_matches_brute_force():
    gen = np.random.default_rng(4)
    history = [gen.standard_normal((3, 4)) for _ in range(6)]
    totals = [0.0, 0.0, 0.0]
    for m in history:
        mean = [sum(m[i][j] for i in range(3)) / 3 for j in range(4)]
        for i in range(3):
            totals[i] += sum((m[i][j] - mean[j]) ** 2 for j in range(4))
    assert np.allclose(mimic_scores(history), totals, rtol=1e-12)
    assert mimic_select(history) == max(range(3), key=lambda i: (totals[i], -i))


@given(
    hnp.arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 3)), elements=st.floats(-10, 10)),
    st.integers(1, 3),
)
def test_foe_damage_monotone_for_mean(honest, f):
    mean = build_pipeline("mean")
    m_bar = honest.mean(axis=0)
    damage = [
        np.linalg.norm(m_bar - mean(np.vstack([honest] + [(1 - tau) * m_bar] * f), f))
        for tau in DEFAULT_FOE_GRID
    ]
    assert all(b >= a - 1e-9 * (1 + a) for a, b in zip(damage, damage[1:]))


def test_craft_deterministic():
    for kind in (AttackKind.FOE, AttackKind.ALIE, AttackKind.SF):
        a = craft(AttackSpec(kind), ctx_for(HONEST))
        b = craft(AttackSpec(kind), ctx_for(HONEST))
        assert np.array_equal(a, b)
