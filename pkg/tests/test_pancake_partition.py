import numpy as np
import pandas as pd
import pytest

import waistPy as wp


def _quadrants():
    spec = wp.MeasureSpec.gaussianAniso([1.0, 1.0])
    directions = [[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]
    return spec, wp.buildPartition(spec, 8.0, directions)


def test_subspace_sequence_frames_are_orthonormal():
    frames = wp.subspaceSequence(5, 2, 3, seed=1)
    assert len(frames) == 3
    for frame in frames:
        assert frame.shape == (5, 2)
        assert np.allclose(frame.T @ frame, np.eye(2))
    assert wp.subspaceSequence(2, 1, 2, seed=0)[0].shape == (2, 0)
    with pytest.raises(wp.WaistError, match="'k'"):
        wp.subspaceSequence(3, 3, 1, seed=0)


def test_tree_directions_avoid_level_frames():
    frames = wp.subspaceSequence(4, 1, 2, seed=3)
    directions = wp.randomTreeDirections(4, 1, 2, seed=3, frames=frames)
    assert directions.shape == (3, 4)
    assert np.allclose(np.linalg.norm(directions, axis=1), 1)
    assert np.allclose(directions[0] @ frames[0], 0, atol=1e-12)
    assert np.allclose(directions[1:] @ frames[1], 0, atol=1e-12)


def test_disk_depth_three_has_equal_leaves():
    directions = wp.randomTreeDirections(2, 1, 3, seed=11)
    result = wp.buildPartition(wp.MeasureSpec.uniformBall(2), 1.0, directions)
    assert len(result.leaves) == 8
    assert result.depth == 3
    assert np.allclose(result.masses, 1 / 8, atol=1e-6)


def test_gaussian_quadrants():
    _, result = _quadrants()
    assert result.offsets.tolist() == pytest.approx([0.0, 0.0, 0.0], abs=1e-6)
    assert np.allclose(result.masses, 0.25, atol=1e-6)
    assert result.leaves[0].contains([[-1.0, -1.0]])[0]
    assert result.leaves[3].contains([[1.0, 1.0]])[0]


def test_partition_needs_full_tree():
    with pytest.raises(wp.WaistError, match="2\\^I - 1"):
        wp.buildPartition(wp.MeasureSpec.uniformBall(2), 1.0, [[1.0, 0.0], [0.0, 1.0]])


def test_partition_table_and_pancake_report():
    directions = wp.randomTreeDirections(2, 1, 3, seed=2)
    result = wp.buildPartition(wp.MeasureSpec.uniformBall(2), 1.0, directions)
    table = wp.partitionTable(result, flat_dim=1)
    assert list(table.columns) == ["leaf", "mass", "delta"]
    assert (table["delta"] > 0).all()

    report = wp.verifyPancake(result, 1, spec=wp.MeasureSpec.uniformBall(2))
    assert report.leaves.shape[0] == 8
    assert report.audit.shape[0] == 14
    assert report.passes


def test_equalize_support_over_two_halves():
    spec = wp.MeasureSpec.uniformBall(2)
    frames = wp.subspaceSequence(2, 1, 1, seed=0)

    # the rightmost point of both halves agrees only for horizontal cuts
    tree = wp.equalizeF(
        spec, 1.0, lambda body: np.array([wp.supportFunction(body, [1.0, 0.0])]), 1, frames,
        seed=0, budget=150, starts=16
    )
    assert tree.converged
    assert tree.spread <= 1e-3
    assert abs(tree.directions[0][0]) < 0.05
    assert tree.partition.F_values.shape == (2, 1)
    assert tree.to_dict()["depth"] == 1


def test_equalize_without_cuts():
    tree = wp.equalizeF(wp.MeasureSpec.uniformBall(2), 1.0, lambda body: np.array([1.0]), 0, [])
    assert tree.converged
    assert tree.F_values.tolist() == [[1.0]]


def test_equalize_rejects_deep_trees():
    frames = wp.subspaceSequence(2, 1, 5, seed=0)
    with pytest.raises(wp.WaistError, match="leaves"):
        wp.equalizeF(wp.MeasureSpec.uniformBall(2), 1.0, lambda body: np.array([0.0]), 5, frames)


def test_pancake_ratio_check_with_wide_tube():
    spec, result = _quadrants()
    table = wp.pancakeRatioCheck(result, spec, np.zeros((4, 2)), 1, 3.0, 0.1, count=2000)
    assert table["holds"].all()
    assert table["bound"].iloc[0] == pytest.approx(float(wp.gaussianSubspaceTube([1.0], 2.9)) - 0.1)


@pytest.mark.slow
def test_deeper_partitions_are_thinner():
    spec = wp.MeasureSpec.gaussianAniso([1.0, 1.0])
    deltas = []
    for depth in [4, 8]:
        directions = wp.randomTreeDirections(2, 1, depth, seed=5)
        result = wp.buildPartition(spec, 6.0, directions)
        deltas.append(wp.partitionTable(result, flat_dim=1)["delta"].max())
    assert deltas[1] < deltas[0]


@pytest.mark.slow
def test_width_audit_on_random_disk_partitions():
    spec = wp.MeasureSpec.uniformBall(2)
    audits = []
    for seed in range(50):
        directions = wp.randomTreeDirections(2, 1, 3, seed=seed)
        report = wp.verifyPancake(wp.buildPartition(spec, 1.0, directions), 1, spec=spec)
        assert report.passes
        assert report.leaves["verified"].all()
        audits.append(report.audit)
    audit = pd.concat(audits)
    assert audit.shape[0] == 50 * 14
    assert (audit["width_ratio"] <= audit["bound"] + 1e-6).all()

    # the john volume of a child never exceeds the parent's
    assert (audit["volume_ratio"] <= 1 + 1e-3).all()
