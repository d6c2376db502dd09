"""Empirical (f, kappa)-robustness certification and executable clipping inequalities.

An aggregator F is (f, kappa)-robust when, for every subset S of n - f inputs,

    |F(x) - mean_S|^2 <= kappa * var_S,   var_S = (1/|S|) sum_{i in S} |x_i - mean_S|^2.

:func:`empirical_kappa` computes the smallest kappa consistent with one
input set by enumerating every such S.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .aggregation import AggregatorSpec, ClipKind, Pipeline, build_pipeline
from .clipping import static_clip
from .errors import AllClipped, InsufficientWorkers, TooManySubsets
from .numkit import RngStream, as_gradient_set, row_norms
from .theory import arc_increment, kappa_nnm

MAX_ENUMERATION_N = 20
ZERO_TOL = 1e-12
SLACK = 1e-9
CERTIFIED_BASES = ("cwtm", "cwmed", "gm", "mk")


@dataclass(frozen=True)
class RobustnessReport:
    kappa_hat: float  # math.inf is the unbounded sentinel
    witness_subset: tuple[int, ...]
    degenerate: bool
    lower_bound: bool = False  # True when subsets were sampled, not enumerated
    subsets_checked: int = 0


def _subset_stats(x: np.ndarray, subsets: np.ndarray, out: np.ndarray):
    rows = x[subsets]  # (m, s, d)
    means = rows.mean(axis=1)
    var = ((rows - means[:, None, :]) ** 2).sum(axis=2).mean(axis=1)
    err = ((out[None, :] - means) ** 2).sum(axis=1)
    scale = (rows**2).sum(axis=2).mean(axis=1)
    return var, err, scale


def _ratios(var, err, scale):
    # zero variance is judged relative to the subset's mean squared norm
    tol = ZERO_TOL * scale
    flat = var <= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(flat, 0.0, err / np.where(flat, 1.0, var))
    r[flat & (err > tol)] = math.inf
    return r


def empirical_kappa(
    aggregator: Callable[[np.ndarray, int], np.ndarray] | AggregatorSpec | str,
    inputs,
    f: int,
    *,
    sample: int | None = None,
    rng: RngStream | None = None,
) -> RobustnessReport:
    """Largest error/variance ratio over every subset of size n - f.

    For n above 20 pass ``sample`` (and ``rng``) to draw that many random
    subsets instead; the result is then only a lower bound on kappa.
    """
    if isinstance(aggregator, (AggregatorSpec, str)):
        aggregator = build_pipeline(aggregator)
    x = as_gradient_set(inputs)
    n = x.shape[0]
    if not 0 <= f < n:
        raise InsufficientWorkers(f"need 0 <= f < n, got n={n}, f={f}")
    out = np.asarray(aggregator(x, f), dtype=np.float64)
    size = n - f
    lower = False
    if n > MAX_ENUMERATION_N:
        if sample is None:
            raise TooManySubsets(
                f"n={n} exceeds the enumeration limit {MAX_ENUMERATION_N}; pass sample= for a sampled lower bound"
            )
        if rng is None:
            raise ValueError("sampled certification needs an rng stream")
        gen = rng.generator()
        subsets = np.sort(
            np.stack([gen.permutation(n)[:size] for _ in range(sample)]), axis=1
        )
        lower = True
    else:
        subsets = np.array(list(itertools.combinations(range(n), size)), dtype=np.int64).reshape(-1, size)

    best, best_idx, degenerate = -1.0, 0, False
    chunk = 4096
    for start in range(0, subsets.shape[0], chunk):
        block = subsets[start : start + chunk]
        r = _ratios(*_subset_stats(x, block, out))
        degenerate = degenerate or bool(np.isinf(r).any())
        j = int(np.argmax(r))  # first maximum, lowest subset in lexicographic order
        if r[j] > best:
            best, best_idx = float(r[j]), start + j
    witness = tuple(int(i) for i in subsets[best_idx])
    return RobustnessReport(max(best, 0.0), witness, degenerate, lower, int(subsets.shape[0]))


def kappa_certificate(n: int, f: int) -> float:
    """Certified kappa of base∘NNM for the four classic base rules."""
    return kappa_nnm(n, f)


def arc_kappa_bound(n: int, f: int) -> float:
    return kappa_nnm(n, f) + arc_increment(n, f)


# ---------------------------------------------------------------------------
# counterexamples


def counterexample_static(C: float, n: int, f: int, d: int = 2) -> np.ndarray:
    """Inputs on which every rule composed with Clip_C loses robustness.

    The n - f honest rows are identical with norm 2C (the first basis vector
    when C = 0), so that subset has zero variance; clipping shrinks them to
    norm C and the output can no longer equal their mean.  The f remaining
    rows are distinct fillers along the second axis.
    """
    if C < 0:
        raise ValueError(f"C must be >= 0, got {C}")
    if f < 1 or n <= f:
        raise ValueError(f"need 1 <= f < n, got n={n}, f={f}")
    if d < 2:
        raise ValueError("need d >= 2")
    x = np.zeros((n, d))
    x[: n - f, 0] = 2.0 * C if C > 0 else 1.0
    scale = C if C > 0 else 1.0
    x[n - f :, 1] = scale * (1.0 + np.arange(f))
    return x


def counterexample_unbounded() -> tuple[np.ndarray, tuple[int, ...], int]:
    """The three-vector instance ((0,1), (1,0), (1,1)) with S = {0, 1} and f = 1."""
    return np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]), (0, 1), 1


# ---------------------------------------------------------------------------
# bounded output


@dataclass(frozen=True)
class BoundedOutputReport:
    passed: bool
    output_norm: float
    bound: float
    output: np.ndarray = field(repr=False)


def _as_pipeline(p) -> Pipeline:
    return p if isinstance(p, Pipeline) else build_pipeline(p)


def check_bounded_output(pipeline, inputs, f: int) -> BoundedOutputReport:
    """Check |output| <= (f+1)-th largest input norm + 1e-9.

    That norm is the smallest possible max over any n - f subset, so this
    is the same as the bound holding for every subset S.
    """
    p = _as_pipeline(pipeline)
    if p.spec.clip is not ClipKind.ARC:
        raise ValueError("bounded output is a property of ARC pipelines")
    x = as_gradient_set(inputs)
    out = p(x, f)
    norms = np.sort(row_norms(x))[::-1]
    bound = float(norms[f])
    val = float(np.linalg.norm(out))
    return BoundedOutputReport(val <= bound + SLACK, val, bound, out)


# ---------------------------------------------------------------------------
# clipping inequalities


@dataclass(frozen=True)
class Clause:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + SLACK


@dataclass(frozen=True)
class InequalityReport:
    clauses: dict
    n_clipped: int
    case: str

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.clauses.values())

    def violations(self) -> list[str]:
        return [k for k, c in self.clauses.items() if not c.holds]


def _var(rows: np.ndarray) -> float:
    return float(((rows - rows.mean(axis=0)) ** 2).sum(axis=1).mean())


def clip_inequality_check(
    inputs,
    S: Sequence[int],
    C: float,
    *,
    base: str | None = None,
    f: int | None = None,
    strict: bool = True,
) -> InequalityReport:
    """Evaluate the variance, bias and robustness inequalities for Clip_C on subset S.

    Clauses ``b2`` (variance shrinkage, in whichever case applies) and
    ``b3`` (bias vs clipped excess) always run.  ``b4`` (bias vs variance)
    and ``b1`` (robustness of ``base∘NNM∘Clip_C``, only when ``base`` is
    given) need an unclipped member of S; without one they raise
    :class:`AllClipped`, or are skipped when ``strict`` is false and no base
    is given.  ``f`` defaults to ``n - |S|``.
    """
    x = as_gradient_set(inputs)
    n = x.shape[0]
    S = np.array(sorted(set(int(i) for i in S)), dtype=np.int64)
    if S.size == 0 or S.min() < 0 or S.max() >= n:
        raise ValueError("S must be a non-empty set of input indices")
    f = n - S.size if f is None else f
    clipped = static_clip(x, C).clipped
    xs, ys = x[S], clipped[S]
    norms = row_norms(xs)
    in_c = norms > C
    n_c, n_s = int(in_c.sum()), int(S.size)
    x_bar, y_bar = xs.mean(axis=0), ys.mean(axis=0)
    var_x, var_y = _var(xs), _var(ys)
    bar_norm = float(np.linalg.norm(x_bar))
    clauses: dict[str, Clause] = {}

    excess = float(((norms[in_c] - C) ** 2).sum())
    if bar_norm <= C:
        case = "mean_inside"
        clauses["b2"] = Clause(var_y, var_x - excess / n_s)
    else:
        case = "mean_outside"
        dev = float(((norms[in_c] - bar_norm) ** 2).sum())
        clauses["b2"] = Clause(var_y, var_x - (n_s - n_c) / n_s * (bar_norm - C) ** 2 - dev / n_s)

    bias = float(((x_bar - y_bar) ** 2).sum())
    clauses["b3"] = Clause(bias, n_c / n_s**2 * excess)

    if n_c == n_s and (strict or base is not None):
        raise AllClipped("every member of S is clipped; the bias and robustness bounds need one that is not")
    if n_c < n_s:
        clauses["b4"] = Clause(bias, n_c / (n_s - n_c) * var_x)

    if base is not None:
        if 2 * f >= n:
            raise InsufficientWorkers(f"need n > 2f, got n={n}, f={f}")
        spec = AggregatorSpec.parse(f"{base}+nnm")
        out = build_pipeline(spec)(clipped, f)
        err = float(((out - x_bar) ** 2).sum())
        kappa = kappa_nnm(n, f) + n_c / (n_s - n_c)
        clauses["b1"] = Clause(err, kappa * var_x)
    return InequalityReport(clauses, n_c, case)


# ---------------------------------------------------------------------------
# randomized certification


def heavy_tailed_set(gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    """Standard normal rows plus one Cauchy-distributed row at a random position."""
    x = gen.standard_normal((n, d))
    x[int(gen.integers(0, n))] = gen.standard_cauchy(d)
    return x


def random_clip_instance(gen: np.random.Generator, *, max_n: int = 10, max_d: int = 6):
    """A random (inputs, S, C, f) triple for the clipping inequalities.

    C is drawn between the smallest norm in S and 1.2 times the largest
    input norm, so S always keeps at least one unclipped member.
    """
    n = int(gen.integers(3, max_n + 1))
    d = int(gen.integers(1, max_d + 1))
    f = int(gen.integers(0, (n - 1) // 2 + 1))
    x = gen.standard_normal((n, d)) * gen.exponential(1.0, size=(n, 1))
    S = np.sort(gen.permutation(n)[: n - f])
    norms = row_norms(x)
    lo, hi = float(norms[S].min()), 1.2 * float(norms.max())
    C = float(gen.uniform(lo, hi))
    return x, tuple(int(i) for i in S), C, f


@dataclass
class PreservationReport:
    n: int
    f: int
    trials: int
    bound: float
    bound_factor3: float
    max_kappa_hat: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_preservation(
    n: int,
    f: int,
    trials: int,
    dim: int | Sequence[int],
    rng: RngStream,
    bases: Sequence[str] = CERTIFIED_BASES,
) -> PreservationReport:
    """Certify base∘NNM∘ARC against kappa + 2f/(n-2f) and against 3 kappa on random inputs."""
    if n <= 2 * f:
        raise InsufficientWorkers(f"need n > 2f, got n={n}, f={f}")
    dims = [dim] if isinstance(dim, int) else list(dim)
    k = kappa_nnm(n, f)
    report = PreservationReport(n, f, trials, k + arc_increment(n, f), 3.0 * k)
    pipes = {b: build_pipeline(f"{b}+nnm+arc") for b in bases}
    gen = rng.generator()
    for trial in range(trials):
        d = int(dims[int(gen.integers(0, len(dims)))])
        x = heavy_tailed_set(gen, n, d)
        for b, p in pipes.items():
            rep = empirical_kappa(p, x, f)
            report.max_kappa_hat[b] = max(report.max_kappa_hat.get(b, 0.0), rep.kappa_hat)
            if rep.kappa_hat > report.bound + SLACK or rep.kappa_hat > report.bound_factor3 + SLACK:
                report.violations.append(
                    {"trial": trial, "base": b, "d": d, "kappa_hat": rep.kappa_hat, "witness": list(rep.witness_subset)}
                )
    return report


__all__ = [
    "BoundedOutputReport",
    "Clause",
    "InequalityReport",
    "PreservationReport",
    "RobustnessReport",
    "arc_kappa_bound",
    "check_bounded_output",
    "check_preservation",
    "clip_inequality_check",
    "counterexample_static",
    "counterexample_unbounded",
    "empirical_kappa",
    "heavy_tailed_set",
    "kappa_certificate",
    "random_clip_instance",
]
