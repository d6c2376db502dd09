"""Byzantine attacks: sign flip, label flip, mimic, fall of empires, a little is enough.

Every adversarial worker sends the same vector.  FOE and ALIE pick their
attack factor each step by grid search against the live aggregator: the
factor that pushes the aggregate farthest from the honest mean wins, with
ties going to the smallest factor.

Mimic copies the honest worker with the largest accumulated squared
deviation from the honest mean over a warm-up window.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyGrid, LabelOutOfRange, NoHonestWorkers
from .numkit import as_gradient_set


class AttackKind(enum.Enum):
    SF = "SF"
    LF = "LF"
    MIMIC = "mimic"
    FOE = "FOE"
    ALIE = "ALIE"


ALL_ATTACKS = (AttackKind.SF, AttackKind.LF, AttackKind.MIMIC, AttackKind.FOE, AttackKind.ALIE)

DEFAULT_FOE_GRID = tuple(0.25 * i for i in range(17))  # 0, 0.25, ..., 4.0
DEFAULT_ALIE_GRID = tuple(round(0.05 * i, 10) for i in range(41))  # 0, 0.05, ..., 2.0


def parse_attack(name: str) -> AttackKind:
    for kind in AttackKind:
        if name.strip().lower() == kind.value.lower():
            return kind
    raise ValueError(f"unknown attack {name!r}; expected one of SF, LF, mimic, FOE, ALIE")


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    tau_grid: tuple[float, ...] = ()
    mimic_target: int | None = None

    def __post_init__(self):
        if self.kind in (AttackKind.FOE, AttackKind.ALIE):
            grid = self.tau_grid or (
                DEFAULT_FOE_GRID if self.kind is AttackKind.FOE else DEFAULT_ALIE_GRID
            )
            object.__setattr__(self, "tau_grid", tuple(float(t) for t in grid))
            if not all(np.isfinite(self.tau_grid)) or min(self.tau_grid) < 0:
                raise EmptyGrid("attack factors must be finite and non-negative")

    @classmethod
    def named(cls, name: str, **kwargs) -> "AttackSpec":
        return cls(parse_attack(name), **kwargs)


@dataclass
class AttackContext:
    honest_momenta: np.ndarray
    aggregator: Callable[[np.ndarray, int], np.ndarray]
    f: int
    # populated by craft() for FOE/ALIE, for inspection
    chosen_tau: float | None = field(default=None, compare=False)


def honest_mean(honest: np.ndarray) -> np.ndarray:
    return honest.mean(axis=0)


def coordinate_std(honest: np.ndarray) -> np.ndarray:
    """Across-worker sample standard deviation per coordinate (zero for one worker)."""
    if honest.shape[0] < 2:
        return np.zeros(honest.shape[1])
    return honest.std(axis=0, ddof=1)


def _damage(ctx: AttackContext, honest: np.ndarray, m_bar: np.ndarray, v: np.ndarray) -> float:
    stacked = np.vstack([honest, np.repeat(v[None, :], ctx.f, axis=0)])
    return float(np.linalg.norm(m_bar - ctx.aggregator(stacked, ctx.f)))


def best_factor(
    ctx: AttackContext, grid: Sequence[float], candidate: Callable[[float], np.ndarray]
) -> tuple[float, np.ndarray]:
    """Grid search for the most damaging factor; ties go to the smallest factor."""
    if len(grid) == 0:
        raise EmptyGrid("attack factor grid is empty")
    honest = ctx.honest_momenta
    m_bar = honest_mean(honest)
    best_tau, best_vec, best_dmg = None, None, -np.inf
    for tau in sorted(grid):
        v = candidate(tau)
        dmg = _damage(ctx, honest, m_bar, v)
        if dmg > best_dmg:
            best_tau, best_vec, best_dmg = tau, v, dmg
    return best_tau, best_vec


def craft(spec: AttackSpec, ctx: AttackContext) -> np.ndarray:
    """The vector each adversarial worker sends this step."""
    if ctx.honest_momenta is None or len(ctx.honest_momenta) == 0:
        raise NoHonestWorkers("attack context has no honest momenta")
    honest = as_gradient_set(ctx.honest_momenta)
    ctx.honest_momenta = honest
    kind = spec.kind
    if kind is AttackKind.LF:
        raise ValueError("label flipping is executed worker-side; craft() does not apply")
    m_bar = honest_mean(honest)
    if kind is AttackKind.SF:
        return -m_bar
    if kind is AttackKind.MIMIC:
        target = 0 if spec.mimic_target is None else spec.mimic_target
        if not 0 <= target < honest.shape[0]:
            raise NoHonestWorkers(f"mimic target {target} is not an honest worker")
        return honest[target].copy()
    if not spec.tau_grid:
        raise EmptyGrid(f"{kind.value} needs a non-empty attack factor grid")
    if kind is AttackKind.FOE:
        tau, v = best_factor(ctx, spec.tau_grid, lambda t: (1.0 - t) * m_bar)
    else:
        sigma = coordinate_std(honest)
        tau, v = best_factor(ctx, spec.tau_grid, lambda t: m_bar + t * sigma)
    ctx.chosen_tau = tau
    return v


def flip_labels(labels, K: int) -> np.ndarray:
    """Label rotation l -> K - 1 - l."""
    y = np.asarray(labels)
    if y.size and (y.min() < 0 or y.max() >= K):
        raise LabelOutOfRange(f"labels must lie in [0, {K})")
    return (K - 1 - y).astype(y.dtype if y.dtype.kind in "iu" else np.int64)


def mimic_scores(history: Sequence[np.ndarray]) -> np.ndarray:
    """Accumulated squared deviation of each honest worker from the honest mean."""
    if len(history) == 0:
        raise NoHonestWorkers("mimic selection needs a non-empty history")
    total = None
    for step in history:
        m = np.asarray(step, dtype=np.float64)
        dev = ((m - m.mean(axis=0)) ** 2).sum(axis=1)
        total = dev if total is None else total + dev
    return total


def mimic_select(history: Sequence[np.ndarray]) -> int:
    scores = mimic_scores(history)
    # argmax returns the first maximum, i.e. the lowest index on ties
    return int(np.argmax(scores))
