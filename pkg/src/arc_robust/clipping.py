"""Static clipping and Adaptive Robust Clipping (ARC)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeThreshold, TooManyByzantine
from .numkit import argsort_desc_stable, as_gradient_set, as_vector, row_norms


@dataclass(frozen=True)
class ClipResult:
    clipped: np.ndarray
    threshold: float
    k: int
    clipped_indices: tuple[int, ...]


def clip_to(x, C: float) -> np.ndarray:
    """Rescale ``x`` to norm ``C`` if it is longer, otherwise return it unchanged."""
    if C < 0:
        raise NegativeThreshold(f"clipping threshold must be >= 0, got {C}")
    v = as_vector(x)
    norm = math.sqrt(float(np.dot(v, v)))
    if norm <= C:
        return v
    return v * (C / norm)


def _clip_rows(x: np.ndarray, norms: np.ndarray, C: float) -> tuple[np.ndarray, np.ndarray]:
    idx = np.flatnonzero(norms > C)
    out = x.copy()
    # rows with norm <= C are left untouched (bit-identical); scaling row by
    # row avoids a gathered temporary the size of the clipped block
    for i in idx:
        np.multiply(x[i], C / norms[i], out=out[i])
    return out, idx


def static_clip(inputs, C: float) -> ClipResult:
    if C < 0:
        raise NegativeThreshold(f"clipping threshold must be >= 0, got {C}")
    if not math.isfinite(C):
        raise NegativeThreshold("clipping threshold must be finite")
    x = as_gradient_set(inputs)
    norms = row_norms(x)
    out, idx = _clip_rows(x, norms, float(C))
    return ClipResult(out, float(C), int(idx.size), tuple(int(i) for i in idx))


def arc_clip_count(n: int, f: int, zeta: float = 2.0) -> int:
    """Number of vectors ARC clips: floor(zeta * f/n * (n - f))."""
    if zeta == 2.0:
        return (2 * f * (n - f)) // n
    if not 0.0 <= zeta <= 2.0:
        raise ValueError(f"clip fraction zeta must lie in [0, 2], got {zeta}")
    return math.floor(zeta * f * (n - f) / n)


def arc(inputs, f: int, *, zeta: float = 2.0) -> ClipResult:
    """Clip the k largest vectors to the norm of the (k+1)-th largest.

    ``k = floor(2 (f/n) (n - f))``.  Rows whose norm equals the threshold are
    not counted as clipped.
    """
    x = as_gradient_set(inputs)
    n = x.shape[0]
    if f < 0 or 2 * f >= n:
        raise TooManyByzantine(f"ARC needs 0 <= f < n/2, got n={n}, f={f}")
    k = arc_clip_count(n, f, zeta)
    norms = row_norms(x)
    order = argsort_desc_stable(norms)
    C = float(norms[order[k]])
    out, idx = _clip_rows(x, norms, C)
    return ClipResult(out, C, k, tuple(int(i) for i in idx))
