"""Smoke tests for the Python bindings."""

import numpy as np
import pytest

import samslr


def test_reduced_indices():
    idx = samslr.reduced_keypoint_indices()
    assert len(idx) == 27
    assert len(set(idx)) == 27
    assert all(0 <= i < 133 for i in idx)


def test_adjacency_is_a_symmetric_tree():
    A = samslr.reduced_adjacency()
    assert A.shape == (27, 27)
    assert np.array_equal(A, A.T)
    assert A.sum() == 2 * 26  # 26 undirected edges
    assert np.all(np.diag(A) == 0)


def test_normalized_adjacency_partitions_sum():
    parts = samslr.normalized_adjacency(spatial_partitions=True)
    assert len(parts) == 3
    combined = sum(parts)
    (single,) = samslr.normalized_adjacency(spatial_partitions=False)
    np.testing.assert_allclose(combined, single, atol=1e-9)
    # spectral radius of the normalized matrix is at most 1
    assert np.max(np.abs(np.linalg.eigvalsh(single))) <= 1 + 1e-9


def test_smooth_labels():
    q = samslr.smooth_labels(1, 4, 0.1)
    np.testing.assert_allclose(q, [0.025, 0.925, 0.025, 0.025], atol=1e-12)
    with pytest.raises(samslr.SamslrError):
        samslr.smooth_labels(4, 4, 0.1)


def test_smoothed_cross_entropy_uniform():
    logits = np.full((3, 8), 0.5)
    assert samslr.smoothed_cross_entropy(logits, [0, 4, 7]) == pytest.approx(np.log(8.0))


def test_synthetic_and_streams():
    data, labels = samslr.generate_synthetic(classes=3, samples_per_class=2, frames=20, seed=5)
    assert data.shape == (6, 20, 133, 3)
    assert labels == [0, 0, 1, 1, 2, 2]
    streams = samslr.prepare_streams(data[0], 512.0, 512.0, target_frames=16)
    assert set(streams) == {"joint", "bone", "joint_motion", "bone_motion"}
    for s in streams.values():
        assert s.shape == (3, 16, 27)
    # normalized coordinates stay in [-1, 1]
    assert np.all(np.abs(streams["joint"][:2]) <= 1.0 + 1e-9)
    # the last motion frame is zero on coordinate channels
    assert np.all(streams["joint_motion"][:2, -1, :] == 0.0)


def test_synthetic_deterministic():
    a, _ = samslr.generate_synthetic(classes=2, samples_per_class=1, frames=8, seed=3)
    b, _ = samslr.generate_synthetic(classes=2, samples_per_class=1, frames=8, seed=3)
    np.testing.assert_array_equal(a, b)


def test_fuse_fixed_matches_numpy():
    rng = np.random.default_rng(0)
    mods = [rng.normal(size=(5, 4)) for _ in range(3)]
    weights = [1.0, 0.9, 0.4]
    fused = samslr.fuse_fixed(mods, weights)
    expected = sum(w * m for w, m in zip(weights, mods))
    np.testing.assert_allclose(fused, expected, atol=1e-12)
    with pytest.raises(samslr.SamslrError):
        samslr.fuse_fixed(mods, [1.0])


def test_evaluate_perfect():
    logits = np.eye(6)
    m = samslr.evaluate(logits, list(range(6)))
    assert m["top1"] == 1.0
    assert m["top5"] == 1.0
    assert m["per_class_top1"] == 1.0


def test_sensitivity_sweep_leave_one_out():
    rng = np.random.default_rng(1)
    labels = [i % 3 for i in range(12)]
    mods = []
    for _ in range(2):
        m = rng.normal(scale=0.1, size=(12, 3))
        m[np.arange(12), labels] += 2.0
        mods.append(m)
    rows, best = samslr.sensitivity_sweep(mods, labels, [1.0, 1.0], [0.0, 1.0])
    assert len(rows) == 4
    assert len(best) == 2
    # weight 0 on modality 0 leaves only modality 1
    solo = samslr.evaluate(mods[1], labels)["top1"]
    assert rows[0] == (0, 0.0, solo)
