"""Robust aggregation rules, nearest-neighbor mixing and pipeline composition.

A pipeline always applies its stages in this order::

    clipping (none / static / ARC) -> NNM (optional) -> base rule -> output clip (optional)

The output clip rescales the aggregate to at most the largest norm among the
vectors handed to NNM/base, which never increases the distance to any subset
mean of those vectors.

All ties (neighbor selection, Krum selection, sorting) are broken by
ascending worker index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .clipping import ClipResult, arc, clip_to, static_clip
from .errors import ConfigError, DimensionMismatch, InsufficientWorkers, NegativeThreshold
from .numkit import as_gradient_set, row_norms

GM_MAX_ITER = 100
GM_TOL = 1e-8
GM_EPS = 1e-12


class Base(enum.Enum):
    MEAN = "mean"
    CWTM = "cwtm"
    CWMED = "cwmed"
    GM = "gm"
    MULTIKRUM = "mk"


class ClipKind(enum.Enum):
    NONE = "none"
    STATIC = "static"
    ARC = "arc"


_BASE_ALIASES = {
    "mean": Base.MEAN,
    "avg": Base.MEAN,
    "cwtm": Base.CWTM,
    "cwmed": Base.CWMED,
    "gm": Base.GM,
    "mk": Base.MULTIKRUM,
    "multikrum": Base.MULTIKRUM,
}


@dataclass(frozen=True)
class AggregatorSpec:
    base: Base = Base.MEAN
    use_nnm: bool = False
    clip: ClipKind = ClipKind.NONE
    clip_threshold: float | None = None
    wlog_output_clip: bool = False
    clip_fraction_zeta: float = 2.0

    def __post_init__(self):
        if self.clip is ClipKind.STATIC:
            if self.clip_threshold is None or not self.clip_threshold >= 0:
                raise NegativeThreshold("static clipping needs a threshold C >= 0")
            if not math.isfinite(self.clip_threshold):
                raise NegativeThreshold("static clipping threshold must be finite")

    @classmethod
    def parse(cls, text: str) -> "AggregatorSpec":
        """Parse strings such as ``"cwtm+nnm+arc"`` or ``"gm+clip:2.0+wlog"``."""
        tokens = [t.strip().lower() for t in text.split("+") if t.strip()]
        if not tokens:
            raise ConfigError(f"empty aggregator spec {text!r}", field="aggregator")
        base = None
        kwargs: dict = {}
        for tok in tokens:
            if tok in _BASE_ALIASES:
                if base is not None:
                    raise ConfigError(f"two base rules in {text!r}", field="aggregator")
                base = _BASE_ALIASES[tok]
            elif tok == "nnm":
                kwargs["use_nnm"] = True
            elif tok == "arc":
                kwargs["clip"] = ClipKind.ARC
            elif tok == "wlog":
                kwargs["wlog_output_clip"] = True
            elif tok.startswith(("clip:", "static:")):
                try:
                    C = float(tok.split(":", 1)[1])
                except ValueError:
                    raise ConfigError(f"bad clip threshold in {text!r}", field="aggregator") from None
                kwargs["clip"] = ClipKind.STATIC
                kwargs["clip_threshold"] = C
            else:
                raise ConfigError(f"unknown aggregator token {tok!r} in {text!r}", field="aggregator")
        if base is None:
            raise ConfigError(f"no base rule in {text!r}", field="aggregator")
        return cls(base=base, **kwargs)

    def __str__(self) -> str:
        parts = [self.base.value]
        if self.use_nnm:
            parts.append("nnm")
        if self.clip is ClipKind.ARC:
            parts.append("arc")
        elif self.clip is ClipKind.STATIC:
            parts.append(f"clip:{self.clip_threshold:g}")
        if self.wlog_output_clip:
            parts.append("wlog")
        return "+".join(parts)


# ---------------------------------------------------------------------------
# base rules


def mean(x: np.ndarray, f: int = 0) -> np.ndarray:
    return x.mean(axis=0)


def cwtm(x: np.ndarray, f: int) -> np.ndarray:
    n = x.shape[0]
    if n <= 2 * f:
        raise InsufficientWorkers(f"CWTM needs n > 2f, got n={n}, f={f}")
    s = np.sort(x, axis=0)
    return s[f : n - f].mean(axis=0)


def cwmed(x: np.ndarray, f: int = 0) -> np.ndarray:
    return np.median(x, axis=0)


def geometric_median(
    x: np.ndarray,
    *,
    max_iter: int = GM_MAX_ITER,
    tol: float = GM_TOL,
    eps: float = GM_EPS,
) -> tuple[np.ndarray, bool]:
    """Weiszfeld iteration started at the mean.

    Stops once the step is at most ``tol * max(1, |z|)``.  Returns the
    estimate and whether that criterion was met within ``max_iter`` steps.
    """
    z = x.mean(axis=0)
    for _ in range(max_iter):
        dist = np.sqrt(((x - z) ** 2).sum(axis=1))
        w = 1.0 / np.maximum(dist, eps)
        z_new = (w[:, None] * x).sum(axis=0) / w.sum()
        step = math.sqrt(float(((z_new - z) ** 2).sum()))
        z = z_new
        if step <= tol * max(1.0, math.sqrt(float(z @ z))):
            return z, True
    return z, False


def gm(x: np.ndarray, f: int = 0) -> np.ndarray:
    return geometric_median(x)[0]


def gm_residual(x: np.ndarray, z: np.ndarray, eps: float = GM_EPS) -> float:
    """Norm of the (sub)gradient sum of unit vectors pointing from z to each x_i."""
    diff = x - z
    dist = np.maximum(np.sqrt((diff**2).sum(axis=1)), eps)
    return float(np.linalg.norm((diff / dist[:, None]).sum(axis=0)))


def _sq_dists(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def krum_scores(x: np.ndarray, f: int) -> np.ndarray:
    """Sum of squared distances to each vector's n-f-1 nearest other vectors."""
    n = x.shape[0]
    m = n - f - 1
    d2 = _sq_dists(x)
    scores = np.empty(n)
    for i in range(n):
        others = np.delete(d2[i], i)
        scores[i] = np.sort(others)[:m].sum()
    return scores


def multikrum(x: np.ndarray, f: int, m: int | None = None) -> np.ndarray:
    n = x.shape[0]
    if n <= 2 * f:
        raise InsufficientWorkers(f"Multi-Krum needs n > 2f, got n={n}, f={f}")
    m = n - f if m is None else m
    scores = krum_scores(x, f)
    chosen = np.lexsort((np.arange(n), scores))[:m]
    return x[np.sort(chosen)].mean(axis=0)


_BASE_FUNCS = {
    Base.MEAN: mean,
    Base.CWTM: cwtm,
    Base.CWMED: cwmed,
    Base.GM: gm,
    Base.MULTIKRUM: multikrum,
}


def nnm(inputs, f: int) -> np.ndarray:
    """Replace each vector by the mean of its n-f nearest neighbors (itself included)."""
    x = as_gradient_set(inputs)
    n = x.shape[0]
    if not 0 <= f < n:
        raise InsufficientWorkers(f"NNM needs 0 <= f < n, got n={n}, f={f}")
    d2 = _sq_dists(x)
    # self always comes first even when duplicates sit at distance zero
    np.fill_diagonal(d2, -1.0)
    idx = np.arange(n)
    out = np.empty_like(x)
    for i in range(n):
        nearest = np.lexsort((idx, d2[i]))[: n - f]
        out[i] = x[np.sort(nearest)].mean(axis=0)
    return out


# ---------------------------------------------------------------------------
# pipelines


class Pipeline:
    """Callable ``(inputs, f) -> aggregate`` built from an :class:`AggregatorSpec`."""

    def __init__(self, spec: AggregatorSpec):
        self.spec = spec
        self._base = _BASE_FUNCS[spec.base]

    def __repr__(self) -> str:
        return f"Pipeline({self.spec})"

    def apply(self, inputs, f: int) -> tuple[np.ndarray, ClipResult | None]:
        """Aggregate and also return the clipping stage result (if any)."""
        x = as_gradient_set(inputs)
        spec = self.spec
        clip = None
        if spec.clip is ClipKind.ARC:
            clip = arc(x, f, zeta=spec.clip_fraction_zeta)
            x = clip.clipped
        elif spec.clip is ClipKind.STATIC:
            clip = static_clip(x, spec.clip_threshold)
            x = clip.clipped
        bound = float(row_norms(x).max()) if spec.wlog_output_clip else None
        if spec.use_nnm:
            x = nnm(x, f)
        out = self._base(x, f)
        if bound is not None:
            out = clip_to(out, bound)
        return out, clip

    def __call__(self, inputs, f: int) -> np.ndarray:
        return self.apply(inputs, f)[0]


def build_pipeline(spec: AggregatorSpec | str) -> Pipeline:
    if isinstance(spec, str):
        spec = AggregatorSpec.parse(spec)
    return Pipeline(spec)


def aggregate(spec: AggregatorSpec | str, inputs, f: int) -> np.ndarray:
    x = as_gradient_set(inputs)
    if f < 0:
        raise InsufficientWorkers(f"f must be non-negative, got {f}")
    return build_pipeline(spec)(x, f)


__all__ = [
    "AggregatorSpec",
    "Base",
    "ClipKind",
    "DimensionMismatch",
    "Pipeline",
    "aggregate",
    "build_pipeline",
    "cwmed",
    "cwtm",
    "geometric_median",
    "gm",
    "gm_residual",
    "krum_scores",
    "mean",
    "multikrum",
    "nnm",
]
