import math
from collections import Counter, defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossproj.errors import ValidationError
from crossproj.voxelgrid import (
    PointCloud,
    SparseVoxelGrid,
    VOID_LABEL,
    coarsen,
    voxel_center,
    voxelize,
)


def brute_voxelize(positions, colors, labels, size, origin):
    """Dict-of-lists grouping oracle, canonical (z, y, x) key order."""
    groups = defaultdict(list)
    for i, p in enumerate(positions):
        key = tuple(int(math.floor((p[a] - origin[a]) / size)) for a in range(3))
        groups[key].append(i)
    keys = sorted(groups, key=lambda k: (k[2], k[1], k[0]))
    feats, labs, counts = [], [], []
    for k in keys:
        members = groups[k]
        feats.append(np.mean([colors[i] for i in members], axis=0))
        counts.append(len(members))
        if labels is not None:
            votes = Counter(int(labels[i]) for i in members)
            top = max(votes.values())
            labs.append(min(l for l, c in votes.items() if c == top))
    return np.array(keys), np.array(feats), (np.array(labs) if labels is not None else None), counts


class TestVoxelize:
    def test_two_points_one_voxel(self):
        cloud = PointCloud(
            [(0.01, 0.01, 0.01), (0.04, 0.02, 0.03)],
            [(1, 0, 0), (0, 1, 0)],
        )
        grid = voxelize(cloud, 0.05)
        assert grid.n == 1
        assert np.array_equal(grid.coords, [[0, 0, 0]])
        assert np.allclose(grid.features, [[0.5, 0.5, 0.0]])

    def test_empty_cloud(self):
        grid = voxelize(PointCloud(np.zeros((0, 3)), np.zeros((0, 3))), 0.1)
        assert grid.n == 0
        assert grid.features.shape == (0, 3)

    def test_boundary_floor_convention(self):
        grid = voxelize(PointCloud([(0.05, 0.0, 0.0)], [(1, 1, 1)]), 0.05)
        assert np.array_equal(grid.coords, [[1, 0, 0]])

    def test_against_brute_force(self, rng):
        n = 500
        pos = rng.uniform(-1, 1, (n, 3))
        col = rng.uniform(0, 1, (n, 3))
        lab = rng.integers(0, 5, n).astype(np.uint16)
        grid = voxelize(PointCloud(pos, col, lab), 0.3, origin=(-1, -1, -1))
        keys, feats, labs, counts = brute_voxelize(pos, col, lab, 0.3, (-1, -1, -1))
        assert np.array_equal(grid.coords, keys)
        assert np.allclose(grid.features, feats, atol=1e-6)
        assert np.array_equal(grid.labels, labs)
        assert sum(counts) == n  # every point lands in exactly one voxel

    def test_label_tie_breaks_to_smallest(self):
        cloud = PointCloud(
            [(0.01, 0.01, 0.01), (0.02, 0.02, 0.02)],
            [(0, 0, 0), (0, 0, 0)],
            [7, 3],
        )
        grid = voxelize(cloud, 0.05)
        assert grid.labels[0] == 3

    def test_nonpositive_size_rejected(self):
        cloud = PointCloud([(0, 0, 0)], [(0, 0, 0)])
        with pytest.raises(ValidationError):
            voxelize(cloud, 0.0)

    def test_nonfinite_coordinate_rejected(self):
        with pytest.raises(ValidationError):
            PointCloud([(np.inf, 0, 0)], [(0, 0, 0)])

    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = 200
        pos = rng.uniform(-1, 1, (n, 3))
        col = rng.uniform(0, 1, (n, 3))
        perm = rng.permutation(n)
        a = voxelize(PointCloud(pos, col), 0.25)
        b = voxelize(PointCloud(pos[perm], col[perm]), 0.25)
        assert np.array_equal(a.coords, b.coords)
        assert np.max(np.abs(a.features.astype(np.float64) - b.features)) <= 1e-9


class TestVoxelCenter:
    def test_origin_voxel(self):
        grid = SparseVoxelGrid(np.zeros(3), 0.05, [[0, 0, 0]], [[0.0]])
        assert np.allclose(voxel_center(grid, 0), (0.025, 0.025, 0.025))

    def test_negative_coord(self):
        grid = SparseVoxelGrid(np.zeros(3), 0.1, [[-1, 0, 2]], [[0.0]])
        assert np.allclose(voxel_center(grid, 0), (-0.05, 0.05, 0.25))

    def test_out_of_range(self):
        grid = SparseVoxelGrid(np.zeros(3), 0.1, [[0, 0, 0]], [[0.0]])
        with pytest.raises(IndexError):
            voxel_center(grid, 1)
        with pytest.raises(IndexError):
            voxel_center(grid, -1)

    def test_centers_match_scalar(self, rng):
        coords = rng.integers(-5, 5, (20, 3))
        coords = np.unique(coords, axis=0)
        grid = SparseVoxelGrid((0.1, -0.2, 0.3), 0.07, coords, np.zeros((len(coords), 1)))
        cs = grid.centers()
        for i in range(grid.n):
            assert np.array_equal(cs[i], voxel_center(grid, i))


class TestCoarsen:
    def test_stride_one_identity(self):
        cloud = PointCloud(np.random.default_rng(0).uniform(0, 1, (50, 3)),
                           np.random.default_rng(1).uniform(0, 1, (50, 3)))
        grid = voxelize(cloud, 0.2)
        coarse, mapping = coarsen(grid, 1)
        assert np.array_equal(coarse.coords, grid.coords)
        assert np.array_equal(coarse.features, grid.features)
        assert coarse.voxel_size == grid.voxel_size
        assert np.array_equal(mapping, np.arange(grid.n))

    def test_small_example(self):
        grid = SparseVoxelGrid(
            np.zeros(3), 0.1,
            [[0, 0, 0], [1, 1, 1], [2, 0, 0]],
            [[1.0], [2.0], [3.0]],
        )
        coarse, mapping = coarsen(grid, 2)
        assert np.array_equal(coarse.coords, [[0, 0, 0], [1, 0, 0]])
        assert coarse.voxel_size == pytest.approx(0.2)
        # first two fine voxels collapse into coarse cell (0,0,0)
        assert mapping[0] == mapping[1]
        assert mapping[2] != mapping[0]
        assert np.allclose(coarse.features[mapping[0]], [1.5])
        assert np.allclose(coarse.features[mapping[2]], [3.0])

    def test_negative_floor(self):
        grid = SparseVoxelGrid(np.zeros(3), 0.1, [[-1, 0, 0]], [[1.0]])
        coarse, _ = coarsen(grid, 2)
        assert np.array_equal(coarse.coords, [[-1, 0, 0]])

    def test_mean_against_brute_force(self, rng):
        coords = np.unique(rng.integers(-8, 8, (200, 3)), axis=0).astype(np.int32)
        feats = rng.uniform(-1, 1, (len(coords), 4)).astype(np.float32)
        grid = SparseVoxelGrid(np.zeros(3), 0.05, coords, feats)
        coarse, mapping = coarsen(grid, 3)
        groups = defaultdict(list)
        for i, c in enumerate(coords):
            groups[tuple(c // 3)].append(i)
        for key, members in groups.items():
            row = mapping[members[0]]
            assert np.array_equal(coarse.coords[row], key)
            assert all(mapping[i] == row for i in members)
            want = np.mean(feats[members].astype(np.float64), axis=0)
            assert np.allclose(coarse.features[row], want, atol=1e-6)

    @settings(deadline=None, max_examples=20)
    @given(seed=st.integers(0, 2**32 - 1),
           a=st.integers(1, 4), b=st.integers(1, 4))
    def test_composition(self, seed, a, b):
        rng = np.random.default_rng(seed)
        coords = np.unique(rng.integers(-20, 20, (100, 3)), axis=0)
        grid = SparseVoxelGrid(np.zeros(3), 0.1, coords, np.ones((len(coords), 1)))
        two_step, _ = coarsen(coarsen(grid, a)[0], b)
        one_step, _ = coarsen(grid, a * b)
        assert np.array_equal(two_step.coords, one_step.coords)

    def test_bad_stride(self):
        grid = SparseVoxelGrid(np.zeros(3), 0.1, [[0, 0, 0]], [[1.0]])
        with pytest.raises(ValidationError):
            coarsen(grid, 0)


class TestGridInvariants:
    def test_duplicate_coords_rejected(self):
        with pytest.raises(ValidationError):
            SparseVoxelGrid(np.zeros(3), 0.1, [[0, 0, 0], [0, 0, 0]], [[1.0], [2.0]])

    def test_feature_count_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            SparseVoxelGrid(np.zeros(3), 0.1, [[0, 0, 0]], [[1.0], [2.0]])

    def test_void_label_reserved_value(self):
        assert VOID_LABEL == 65535
