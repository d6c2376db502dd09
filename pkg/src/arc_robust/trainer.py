"""Robust distributed (stochastic) gradient descent simulator.

With ``batch_size == 0`` and ``momentum == 0`` a run is plain Robust-DGD:
honest workers send full local gradients.  Otherwise each honest worker
samples a mini-batch (with replacement) from its shard, updates its momentum
``m_t = (1 - beta) g_t + beta m_{t-1}`` (``m_0 = 0``) and sends it.

Workers ``0 .. n-f-1`` are honest and ``n-f .. n-1`` adversarial; the server
stacks their vectors in that order before aggregating.

Metrics for step t are taken at ``theta_t``, before the update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .aggregation import AggregatorSpec, ClipKind, build_pipeline
from .attacks import AttackContext, AttackKind, AttackSpec, craft, flip_labels
from .data import Dataset, Partition, dirichlet_partition, extreme_partition
from .errors import ConfigError, DimensionMismatch, DivergenceGuard, UnknownLipschitz
from .models import MLP1, Logistic, Quadratic
from .numkit import (
    STREAM_BATCH,
    STREAM_INIT,
    STREAM_OUTPUT,
    STREAM_PARTITION,
    STREAM_TASK,
    rng_stream,
)

MIMIC_WARMUP_FRACTION = 0.1
DEFAULT_B_GRID = (0.0, 0.5, 1.0, 2.0, 3.0)
GROWTH_SLACK = 1e-9


@dataclass(frozen=True)
class TrainingConfig:
    n: int = 11
    f: int = 1
    steps: int = 300
    lr: float = 0.1
    lr_decay_step: int | None = None
    lr_decay_factor: float = 1.0
    momentum: float = 0.9
    batch_size: int = 25
    aggregator: AggregatorSpec = field(default_factory=lambda: AggregatorSpec.parse("cwtm+nnm"))
    attack: AttackSpec | None = None
    heterogeneity: str = "extreme"
    alpha: float = 1.0
    seed: int = 1
    init_scale: float = 1.0
    model: str = "logistic"
    hidden: int = 32
    l2_reg: float = 1e-4
    quad_dim: int = 10
    quad_L: float = 1.0
    quad_spread: float = 1.0
    eval_every: int = 1

    def __post_init__(self):
        if self.n < 1 or self.f < 0 or 2 * self.f >= self.n:
            raise ConfigError(f"need 0 <= f < n/2, got n={self.n}, f={self.f}", field="f")
        if not self.lr > 0:
            raise ConfigError("learning rate must be positive", field="lr")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1", field="steps")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)", field="momentum")
        if self.batch_size < 0:
            raise ConfigError("batch_size must be >= 0", field="batch_size")
        if self.init_scale < 1:
            raise ConfigError("init_scale must be >= 1", field="init_scale")
        if self.heterogeneity not in ("extreme", "dirichlet"):
            raise ConfigError(f"unknown heterogeneity {self.heterogeneity!r}", field="heterogeneity")
        if self.model not in ("logistic", "mlp1", "quadratic"):
            raise ConfigError(f"unknown model {self.model!r}", field="model")
        if self.attack is None and self.f > 0:
            raise ConfigError("f > 0 requires an attack", field="attack")
        if self.attack is not None and self.f == 0:
            raise ConfigError("an attack needs f >= 1", field="f")
        if self.model == "quadratic" and self.attack is not None and self.attack.kind is AttackKind.LF:
            raise ConfigError("label flipping needs a classification model", field="attack")

    @property
    def n_honest(self) -> int:
        return self.n - self.f

    def lr_at(self, t: int) -> float:
        if self.lr_decay_step is not None and t > self.lr_decay_step:
            return self.lr * self.lr_decay_factor
        return self.lr


@dataclass
class StepRecord:
    step: int
    train_acc: float | None
    test_acc: float | None
    loss: float
    clip_threshold: float | None
    honest_mean_norm: float
    max_honest_grad_norm: float
    full_grad_norm: float


@dataclass
class MetricsLog:
    attack: str
    aggregator: str
    seed: int
    model_kind: str = "logistic"
    records: list[StepRecord] = field(default_factory=list)
    failed: bool = False
    failure: str | None = None
    theta_hat_step: int | None = None
    theta_hat_test_acc: float | None = None
    lipschitz: float | None = None
    lr: float | None = None
    gradient_trajectory: list[np.ndarray] | None = None

    def max_test_accuracy(self) -> float:
        accs = [r.test_acc for r in self.records if r.test_acc is not None]
        return max(accs) if accs else float("nan")

    def summary(self) -> dict:
        return {
            "attack": self.attack,
            "aggregator": self.aggregator,
            "seed": self.seed,
            "steps_recorded": len(self.records),
            "failed": self.failed,
            "failure": self.failure,
            "max_test_accuracy": self.max_test_accuracy(),
            "theta_hat_step": self.theta_hat_step,
            "theta_hat_test_accuracy": self.theta_hat_test_acc,
        }


@dataclass(frozen=True)
class ModelState:
    theta: np.ndarray
    model: Logistic | MLP1 | Quadratic


def compute_momentum(g, m_prev, beta: float) -> np.ndarray:
    if not 0 <= beta < 1:
        raise ValueError(f"momentum must lie in [0, 1), got {beta}")
    return (1.0 - beta) * np.asarray(g, dtype=np.float64) + beta * np.asarray(m_prev, dtype=np.float64)


def evaluate(state: ModelState, dataset: Dataset) -> float:
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    model = state.model
    if isinstance(model, Quadratic):
        raise ValueError("accuracy is undefined for the quadratic model")
    if dataset.d_in != model.d_in:
        raise DimensionMismatch(f"model expects {model.d_in} features, got {dataset.d_in}")
    if state.theta.shape != (model.n_params,):
        raise DimensionMismatch(f"theta has shape {state.theta.shape}, model needs {model.n_params}")
    pred = model.predict(state.theta, dataset.features)
    return float(np.mean(pred == dataset.labels))


def worst_case_max_accuracy(logs: Mapping[str, MetricsLog]) -> float:
    if not logs:
        raise ValueError("need at least one log")
    return min(log.max_test_accuracy() for log in logs.values())


def estimate_gb(trajectory: Sequence[np.ndarray], B_grid: Sequence[float] = DEFAULT_B_GRID) -> dict[float, float]:
    """Smallest G for each B such that the observed honest gradients satisfy
    ``mean_i |g_i - g_H|^2 <= G^2 + B^2 |g_H|^2`` at every recorded step."""
    if len(trajectory) == 0:
        raise ValueError("trajectory is empty")
    diss, sq = [], []
    for grads in trajectory:
        g = np.asarray(grads, dtype=np.float64)
        g_h = g.mean(axis=0)
        diss.append(float(((g - g_h) ** 2).sum(axis=1).mean()))
        sq.append(float(g_h @ g_h))
    diss_a, sq_a = np.array(diss), np.array(sq)
    return {float(B): math.sqrt(max(0.0, float((diss_a - B * B * sq_a).max()))) for B in B_grid}


@dataclass(frozen=True)
class GrowthReport:
    passed: bool
    bound: float
    max_ratio: float
    first_violation_step: int | None


def max_grad_growth_check(log: MetricsLog, L: float | None = None, gamma: float | None = None) -> GrowthReport:
    """Check that the max honest gradient norm grows by at most (1 + gamma L) per step."""
    if log.model_kind != "quadratic":
        raise UnknownLipschitz(f"no known smoothness constant for model {log.model_kind!r}")
    L = log.lipschitz if L is None else L
    gamma = log.lr if gamma is None else gamma
    if L is None or gamma is None:
        raise UnknownLipschitz("smoothness constant or step size missing")
    bound = 1.0 + gamma * L
    norms = [r.max_honest_grad_norm for r in log.records]
    worst, first = 0.0, None
    for t in range(len(norms) - 1):
        cur, nxt = norms[t], norms[t + 1]
        if cur > 0:
            ratio = nxt / cur
            ok = ratio <= bound + GROWTH_SLACK
        else:
            ratio = math.inf if nxt > GROWTH_SLACK else 0.0
            ok = nxt <= GROWTH_SLACK
        worst = max(worst, ratio)
        if not ok and first is None:
            first = log.records[t + 1].step
    return GrowthReport(first is None, bound, worst, first)


# ---------------------------------------------------------------------------
# simulation


def _build_model(cfg: TrainingConfig, dataset: Dataset | None):
    if cfg.model == "quadratic":
        gen = rng_stream(cfg.seed, STREAM_TASK).generator()
        return Quadratic.random(gen, cfg.quad_dim, cfg.n_honest, L=cfg.quad_L, spread=cfg.quad_spread)
    if dataset is None:
        raise ConfigError("classification models need a dataset", field="model")
    if cfg.model == "logistic":
        return Logistic(dataset.K, dataset.d_in, cfg.l2_reg)
    return MLP1(cfg.hidden, dataset.K, dataset.d_in, cfg.l2_reg)


def make_partition(cfg: TrainingConfig, dataset: Dataset) -> Partition:
    if cfg.heterogeneity == "extreme":
        return extreme_partition(dataset.labels, cfg.n_honest)
    return dirichlet_partition(dataset.labels, cfg.n_honest, cfg.alpha, rng_stream(cfg.seed, STREAM_PARTITION))


def _read_only(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.flags.writeable = False
    return v


def run(
    config: TrainingConfig,
    dataset: Dataset | None = None,
    test_set: Dataset | None = None,
    *,
    record_gradients: bool = False,
) -> MetricsLog:
    cfg = config
    model = _build_model(cfg, dataset)
    quadratic = isinstance(model, Quadratic)
    pipeline = build_pipeline(cfg.aggregator)
    attack = cfg.attack
    nh, f = cfg.n_honest, cfg.f

    log = MetricsLog(
        attack=attack.kind.value if attack else "none",
        aggregator=str(cfg.aggregator),
        seed=cfg.seed,
        model_kind=model.kind,
        lipschitz=model.lipschitz if quadratic else None,
        lr=cfg.lr,
        gradient_trajectory=[] if record_gradients else None,
    )

    shards: list[Dataset] = []
    train_union = None
    if not quadratic:
        part = make_partition(cfg, dataset)
        shards = [dataset.subset(idx) for idx in part.assignment]
        if any(len(s) == 0 for s in shards):
            raise ConfigError("partition left an honest worker without data", field="heterogeneity")
        train_union = dataset.subset(np.sort(np.concatenate(part.assignment)))

    theta = model.init(rng_stream(cfg.seed, STREAM_INIT).generator(), cfg.init_scale)
    batch_root = rng_stream(cfg.seed, STREAM_BATCH)
    batch_gens = [batch_root.child(i).generator() for i in range(nh + f)]
    momenta = np.zeros((nh, model.n_params))
    adv_momenta = np.zeros((f, model.n_params))
    thetas: list[np.ndarray] = []

    lf_set = None
    if attack is not None and attack.kind is AttackKind.LF:
        lf_set = Dataset(train_union.features, flip_labels(train_union.labels, dataset.K), dataset.K)
    warmup = max(1, math.ceil(MIMIC_WARMUP_FRACTION * cfg.steps))
    mimic_totals = np.zeros(nh)
    mimic_target = 0

    def local(theta, i, batch=None):
        if quadratic:
            return model.local_loss_and_grad(theta, i)
        X, y = shards[i].features, shards[i].labels
        if batch is not None:
            X, y = X[batch], y[batch]
        return model.loss_and_grad(theta, X, y)

    for t in range(1, cfg.steps + 1):
        thetas.append(theta.copy())
        with np.errstate(over="ignore", invalid="ignore"):
            full = [local(theta, i) for i in range(nh)]
        losses = np.array([lg[0] for lg in full])
        full_grads = np.vstack([lg[1] for lg in full])
        loss = float(losses.mean())
        if not math.isfinite(loss) or not np.all(np.isfinite(full_grads)):
            log.failed, log.failure = True, f"non-finite loss at step {t}"
            break
        if record_gradients:
            log.gradient_trajectory.append(full_grads.copy())
        grad_h = full_grads.mean(axis=0)

        # honest workers
        if cfg.batch_size == 0 or quadratic:
            grads = full_grads
        else:
            grads = np.empty_like(full_grads)
            for i in range(nh):
                b = batch_gens[i].integers(0, len(shards[i]), cfg.batch_size)
                grads[i] = local(theta, i, b)[1]
        momenta = (1.0 - cfg.momentum) * grads + cfg.momentum * momenta
        honest_view = _read_only(momenta)

        # adversarial workers only ever see a read-only view of honest state
        if attack is None:
            adv = np.empty((0, model.n_params))
        elif attack.kind is AttackKind.LF:
            adv_grads = np.empty((f, model.n_params))
            for j in range(f):
                b = batch_gens[nh + j].integers(0, len(lf_set), cfg.batch_size or len(lf_set))
                adv_grads[j] = model.loss_and_grad(theta, lf_set.features[b], lf_set.labels[b])[1]
            adv_momenta = (1.0 - cfg.momentum) * adv_grads + cfg.momentum * adv_momenta
            adv = adv_momenta
        else:
            spec = attack
            if attack.kind is AttackKind.MIMIC:
                if attack.mimic_target is None:
                    if t <= warmup:
                        mimic_totals += ((honest_view - honest_view.mean(axis=0)) ** 2).sum(axis=1)
                        mimic_target = int(np.argmax(mimic_totals))
                    spec = replace(attack, mimic_target=mimic_target)
            ctx = AttackContext(honest_view, pipeline, f)
            v = craft(spec, ctx)
            adv = np.repeat(v[None, :], f, axis=0)
        assert not honest_view.flags.writeable

        stacked = np.vstack([momenta, adv])
        R, clip = pipeline.apply(stacked, f)
        C_t = clip.threshold if (clip is not None and cfg.aggregator.clip is ClipKind.ARC) else None

        train_acc = test_acc = None
        if not quadratic and ((t - 1) % cfg.eval_every == 0 or t == cfg.steps):
            state = ModelState(theta, model)
            train_acc = evaluate(state, train_union)
            test_acc = evaluate(state, test_set) if test_set is not None else train_acc
        log.records.append(
            StepRecord(
                step=t,
                train_acc=train_acc,
                test_acc=test_acc,
                loss=loss,
                clip_threshold=C_t,
                honest_mean_norm=float(np.linalg.norm(momenta.mean(axis=0))),
                max_honest_grad_norm=float(np.sqrt((full_grads**2).sum(axis=1)).max()),
                full_grad_norm=float(np.linalg.norm(grad_h)),
            )
        )
        theta = theta - cfg.lr_at(t) * R
        if not np.all(np.isfinite(theta)):
            log.failed, log.failure = True, f"non-finite parameters after step {t}"
            break

    if thetas:
        pick = int(rng_stream(cfg.seed, STREAM_OUTPUT).generator().integers(0, len(thetas)))
        log.theta_hat_step = pick + 1
        if not quadratic and test_set is not None:
            log.theta_hat_test_acc = evaluate(ModelState(thetas[pick], model), test_set)
    return log


def run_checked(config: TrainingConfig, dataset=None, test_set=None) -> MetricsLog:
    """Like :func:`run` but raises :class:`DivergenceGuard` on a failed run."""
    log = run(config, dataset, test_set)
    if log.failed:
        raise DivergenceGuard(log.failure)
    return log
