"""Datasets, heterogeneous partitioning and an IDX (MNIST-style) loader."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, CountMismatch, EmptyWorkerRetry, LabelOutOfRange, Truncated
from .numkit import RngStream

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
MNIST_MEAN = 0.1307
MNIST_STD = 0.3081
DIRICHLET_MAX_TRIES = 100


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    K: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise CountMismatch(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.K):
            raise LabelOutOfRange(f"labels must lie in [0, {self.K})")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def d_in(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.K)


@dataclass(frozen=True)
class Partition:
    assignment: tuple[np.ndarray, ...]

    @property
    def n_workers(self) -> int:
        return len(self.assignment)

    def sizes(self) -> list[int]:
        return [int(a.size) for a in self.assignment]


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    raw = weights * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        # biggest fractional parts first, lowest index on ties
        order = np.lexsort((np.arange(raw.size), -(raw - counts)))
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(labels, n_workers: int, alpha: float, rng: RngStream) -> Partition:
    """Split each class across workers in Dirichlet(alpha)-distributed proportions."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if n_workers < 1:
        raise ValueError("need at least one worker")
    y = np.asarray(labels)
    if n_workers == 1:
        return Partition((np.arange(y.size, dtype=np.int64),))
    gen = rng.generator()
    classes = np.unique(y)
    for _ in range(DIRICHLET_MAX_TRIES):
        buckets: list[list[np.ndarray]] = [[] for _ in range(n_workers)]
        for c in classes:
            members = np.flatnonzero(y == c)
            members = members[gen.permutation(members.size)]
            p = gen.dirichlet(np.full(n_workers, float(alpha)))
            p = np.nan_to_num(p, nan=0.0)
            if p.sum() <= 0:
                p = np.full(n_workers, 1.0 / n_workers)
            counts = _largest_remainder(members.size, p / p.sum())
            bounds = np.concatenate([[0], np.cumsum(counts)])
            for w in range(n_workers):
                buckets[w].append(members[bounds[w] : bounds[w + 1]])
        parts = tuple(np.sort(np.concatenate(b)).astype(np.int64) for b in buckets)
        if all(p.size > 0 for p in parts):
            return Partition(parts)
    raise EmptyWorkerRetry(
        f"some worker stayed empty after {DIRICHLET_MAX_TRIES} Dirichlet draws"
    )


def extreme_partition(labels, n_workers: int) -> Partition:
    """Sort by label (stable) and cut into equal contiguous chunks; the last takes the rest."""
    if n_workers < 1:
        raise ValueError("need at least one worker")
    y = np.asarray(labels)
    order = np.argsort(y, kind="stable").astype(np.int64)
    chunk = y.size // n_workers
    parts = [order[i * chunk : (i + 1) * chunk] for i in range(n_workers - 1)]
    parts.append(order[(n_workers - 1) * chunk :])
    return Partition(tuple(parts))


def class_anchors(K: int, d_in: int) -> np.ndarray:
    """Distinct unit-norm class centers, independent of any seed."""
    if K <= d_in:
        return np.eye(K, d_in)
    raw = np.random.Generator(np.random.Philox(key=np.array([0, 0], dtype=np.uint64))).standard_normal(
        (K, d_in)
    )
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def synth_generate(
    K: int,
    d_in: int,
    per_class: int,
    spread: float,
    rng: RngStream,
    *,
    separation: float = 1.0,
    offset: float = 0.0,
) -> Dataset:
    """Isotropic Gaussian blobs: class k is ``offset * u + separation * anchor_k + spread * N(0, I)``.

    ``u`` is the all-ones direction normalised to unit length.  A non-zero
    ``offset`` gives every sample a shared component (like the dark background
    of normalised MNIST digits), so single-class workers produce large local
    gradients that largely cancel in the mean.
    """
    if K < 2 or per_class < 1:
        raise ValueError("need K >= 2 classes and per_class >= 1")
    gen = rng.generator()
    means = separation * class_anchors(K, d_in)
    labels = np.repeat(np.arange(K, dtype=np.int64), per_class)
    noise = gen.standard_normal((K * per_class, d_in))
    features = means[labels] + spread * noise + offset / np.sqrt(d_in)
    return Dataset(features, labels, K)


def _read_exact(buf: bytes, offset: int, size: int, what: str) -> bytes:
    if offset + size > len(buf):
        raise Truncated(f"{what}: expected {size} bytes at offset {offset}, file has {len(buf)}")
    return buf[offset : offset + size]


def read_idx_images(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    magic, count, rows, cols = struct.unpack(">IIII", _read_exact(buf, 0, 16, str(path)))
    if magic != IDX_IMAGES_MAGIC:
        raise BadMagic(f"{path}: magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")
    body = _read_exact(buf, 16, count * rows * cols, str(path))
    return np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols)


def read_idx_labels(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    magic, count = struct.unpack(">II", _read_exact(buf, 0, 8, str(path)))
    if magic != IDX_LABELS_MAGIC:
        raise BadMagic(f"{path}: magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")
    body = _read_exact(buf, 8, count, str(path))
    return np.frombuffer(body, dtype=np.uint8).astype(np.int64)


def write_idx_images(path, images) -> None:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols) + images.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


def idx_load(images_path, labels_path, K: int = 10) -> Dataset:
    pixels = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{pixels.shape[0]} images but {labels.shape[0]} labels")
    features = (pixels.astype(np.float64) / 255.0 - MNIST_MEAN) / MNIST_STD
    return Dataset(features, labels, K)


def label_entropy(labels, K: int) -> float:
    counts = np.bincount(np.asarray(labels), minlength=K).astype(np.float64)
    if counts.sum() == 0:
        return 0.0
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())
