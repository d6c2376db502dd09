"""Dense vector helpers, stable ordering and reproducible random streams.

Vectors are 1-D ``float64`` arrays and a gradient set is an ``(n, d)``
``float64`` array whose rows are the worker vectors.

Random streams use numpy's counter-based Philox generator keyed directly by
``(seed, stream_id)``.  Philox output depends only on the key and the counter,
so a stream yields the same draws on every platform and in every thread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput

_MASK64 = (1 << 64) - 1

# Well-known stream ids; per-worker streams are derived with RngStream.child.
STREAM_DATA = 1
STREAM_PARTITION = 2
STREAM_BATCH = 3
STREAM_INIT = 4
STREAM_ATTACK = 5
STREAM_OUTPUT = 6
STREAM_TEST_DATA = 7
STREAM_TASK = 8


def as_vector(x) -> np.ndarray:
    v = np.array(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput("vector contains NaN or Inf")
    return v


def as_gradient_set(rows) -> np.ndarray:
    """Validate ``rows`` as an ``(n, d)`` float64 array.

    An existing float64 array is returned as is (or reshaped), not copied;
    nothing in the package writes into its inputs.
    """
    try:
        x = np.asarray(rows, dtype=np.float64)
    except ValueError as exc:  # ragged nested sequences
        raise DimensionMismatch(f"rows have unequal dimension: {exc}") from None
    if x.ndim == 1:
        # a flat sequence is read as n one-dimensional vectors
        x = x.reshape(-1, 1)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected an (n, d) array, got shape {x.shape}")
    if x.shape[0] < 1:
        raise DimensionMismatch("a gradient set needs at least one row")
    # a finite sum proves every entry finite without a full-size mask
    if not np.isfinite(x.sum()) and not np.all(np.isfinite(x)):
        raise NonFiniteInput("gradient set contains NaN or Inf")
    return x


def l2_norm(x) -> float:
    return float(np.sqrt(np.dot(x, x)))


def row_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", x, x))


def argsort_desc_stable(values) -> np.ndarray:
    """Indices sorting ``values`` non-increasingly; ties keep ascending index."""
    v = np.asarray(values, dtype=np.float64)
    # lexsort sorts by the last key first; negate for descending order
    return np.lexsort((np.arange(v.size), -v))


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "RngStream":
        """Substream for e.g. one worker of this stream."""
        return RngStream(self.seed, ((self.stream_id << 20) + index + 1) & _MASK64)


def rng_stream(seed: int, stream_id: int = 0) -> RngStream:
    return RngStream(int(seed), int(stream_id))
