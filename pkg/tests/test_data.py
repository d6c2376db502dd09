import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arc_robust.data import (
    MNIST_MEAN,
    MNIST_STD,
    dirichlet_partition,
    extreme_partition,
    idx_load,
    label_entropy,
    synth_generate,
    write_idx_images,
    write_idx_labels,
)
from arc_robust.errors import BadMagic, CountMismatch, EmptyWorkerRetry, Truncated
from arc_robust.models import Logistic
from arc_robust.numkit import rng_stream


def assert_exact_cover(part, n_samples):
    allidx = np.concatenate(part.assignment)
    assert np.array_equal(np.sort(allidx), np.arange(n_samples))


@given(
    st.lists(st.integers(0, 4), min_size=1, max_size=60),
    st.integers(1, 8),
    st.sampled_from([0.1, 1.0, 100.0]),
    st.integers(0, 2**32),
)
def test_partitions_are_exact_covers(labels, workers, alpha, seed):
    y = np.array(labels)
    assert_exact_cover(extreme_partition(y, workers), y.size)
    if y.size >= workers:
        try:
            part = dirichlet_partition(y, workers, alpha, rng_stream(seed, 0))
        except EmptyWorkerRetry:
            # legitimate when a few samples must cover many workers
            pass
        else:
            assert_exact_cover(part, y.size)
            assert all(s > 0 for s in part.sizes())


def test_single_worker_partitions():
    y = np.array([3, 1, 2, 1])
    assert dirichlet_partition(y, 1, 0.5, rng_stream(0)).assignment[0].tolist() == [0, 1, 2, 3]
    assert sorted(extreme_partition(y, 1).assignment[0].tolist()) == [0, 1, 2, 3]


def test_extreme_partition_examples():
    part = extreme_partition([0, 0, 1, 1], 2)
    assert [a.tolist() for a in part.assignment] == [[0, 1], [2, 3]]
    y = np.repeat(np.arange(10), 7)
    for i, idx in enumerate(extreme_partition(y, 10).assignment):
        assert set(y[idx]) == {i}


def test_dirichlet_large_alpha_matches_global_proportions():
    y = np.repeat(np.arange(10), 1000)
    part = dirichlet_partition(y, 10, 1e6, rng_stream(3))
    for idx in part.assignment:
        props = np.bincount(y[idx], minlength=10) / idx.size
        assert np.all(np.abs(props - 0.1) <= 0.05)


def test_dirichlet_deterministic():
    y = np.repeat(np.arange(5), 40)
    a = dirichlet_partition(y, 6, 0.3, rng_stream(11))
    b = dirichlet_partition(y, 6, 0.3, rng_stream(11))
    assert all(np.array_equal(p, q) for p, q in zip(a.assignment, b.assignment))


def test_heterogeneity_monotone_in_alpha():
    y = np.repeat(np.arange(10), 100)

    def mean_entropy(alpha, seed):
        part = dirichlet_partition(y, 10, alpha, rng_stream(seed))
        return np.mean([label_entropy(y[idx], 10) for idx in part.assignment])

    low = [mean_entropy(0.1, s) for s in range(20)]
    high = [mean_entropy(1e6, s) for s in range(20)]
    assert all(a < b for a, b in zip(low, high))


def test_synth_examples():
    d = synth_generate(2, 4, 3, 0.5, rng_stream(0))
    assert len(d) == 6 and d.labels.tolist() == [0, 0, 0, 1, 1, 1]
    again = synth_generate(2, 4, 3, 0.5, rng_stream(0))
    assert np.array_equal(d.features, again.features)


def test_synth_offset_is_common_shift():
    a = synth_generate(3, 9, 5, 0.2, rng_stream(2))
    b = synth_generate(3, 9, 5, 0.2, rng_stream(2), offset=6.0)
    assert np.allclose(b.features - a.features, 2.0, rtol=0, atol=1e-12)


def test_synth_zero_spread_is_separable():
    data = synth_generate(4, 6, 10, 0.0, rng_stream(5))
    model = Logistic(4, 6, 0.0)
    theta = np.zeros(model.n_params)
    for _ in range(500):
        theta -= 1.0 * model.loss_and_grad(theta, data.features, data.labels)[1]
    assert np.mean(model.predict(theta, data.features) == data.labels) == 1.0


@pytest.fixture
def idx_files(tmp_path):
    images = np.zeros((4, 2, 3), dtype=np.uint8)
    images[1] = 255
    images[2, 0, 0] = 51
    labels = np.array([0, 1, 2, 9], dtype=np.uint8)
    write_idx_images(tmp_path / "img", images)
    write_idx_labels(tmp_path / "lab", labels)
    return tmp_path / "img", tmp_path / "lab"


def test_idx_round_trip(idx_files):
    data = idx_load(*idx_files)
    assert len(data) == 4 and data.d_in == 6
    assert data.labels.tolist() == [0, 1, 2, 9]
    assert np.allclose(data.features[0], (0 - MNIST_MEAN) / MNIST_STD, rtol=0, atol=1e-15)
    assert np.allclose(data.features[1], (1 - MNIST_MEAN) / MNIST_STD, rtol=0, atol=1e-15)
    assert data.features[2, 0] == pytest.approx((0.2 - MNIST_MEAN) / MNIST_STD, abs=1e-15)


def test_all_zero_image_normalisation_value(idx_files):
    data = idx_load(*idx_files)
    assert data.features[0, 0] == pytest.approx(-0.42421291788380394, abs=1e-15)


def test_idx_errors(tmp_path, idx_files):
    img, _ = idx_files
    short = tmp_path / "short"
    write_idx_labels(short, [0, 1, 2])
    with pytest.raises(CountMismatch):
        idx_load(img, short)
    bad = tmp_path / "bad"
    bad.write_bytes(struct.pack(">II", 0x0802, 0))
    with pytest.raises(BadMagic):
        idx_load(img, bad)
    trunc = tmp_path / "trunc"
    trunc.write_bytes(img.read_bytes()[:-1])
    with pytest.raises(Truncated):
        idx_load(trunc, idx_files[1])
    header_only = tmp_path / "hdr"
    header_only.write_bytes(b"\x00\x00")
    with pytest.raises(Truncated):
        idx_load(header_only, idx_files[1])
