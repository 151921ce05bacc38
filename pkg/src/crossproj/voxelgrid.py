"""Sparse voxelization of colored/labeled point clouds and pyramid coarsening.

Grids are stored sparsely: an (N, 3) table of integer voxel coordinates with
an (N, C) feature row per voxel and optional per-voxel labels.  Voxel index
of a point is floor((p - origin) / voxel_size) componentwise.  Grids built
by :func:`voxelize` and :func:`coarsen` come out in canonical order (rows
sorted lexicographically by z, then y, then x) so outputs are deterministic;
grids loaded from files keep their stored order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError

__all__ = ["PointCloud", "SparseVoxelGrid", "voxelize", "voxel_center", "coarsen", "VOID_LABEL"]

# Reserved label meaning "no semantic assignment" (fits u16 storage).
VOID_LABEL = 65535


@dataclass
class PointCloud:
    """Point positions in meters with [0, 1] RGB colors and optional labels."""

    positions: np.ndarray
    colors: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if len(pos) != len(col):
            raise ValidationError(f"{len(pos)} positions but {len(col)} colors")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("point positions contain non-finite values")
        if len(col) and (col.min() < 0.0 or col.max() > 1.0):
            raise ValidationError("colors must lie in [0, 1]")
        self.positions = pos
        self.colors = col
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (len(pos),):
                raise ValidationError(f"labels shape {lab.shape} does not match {len(pos)} points")
            if lab.size and (lab.min() < 0 or lab.max() > VOID_LABEL):
                raise ValidationError(f"labels must fit in [0, {VOID_LABEL}]")
            self.labels = lab.astype(np.uint16)

    def __len__(self):
        return len(self.positions)


@dataclass
class SparseVoxelGrid:
    """Sparse voxel grid: unique integer coordinates plus per-voxel features."""

    origin: np.ndarray
    voxel_size: float
    coords: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.voxel_size = float(self.voxel_size)
        if self.voxel_size <= 0.0:
            raise ValidationError(f"voxel_size must be positive, got {self.voxel_size}")
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.int32).reshape(-1, 3))
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float32))
        if feats.ndim != 2:
            raise ValidationError(f"features must be 2-D (N, C), got shape {feats.shape}")
        if len(feats) != len(coords):
            raise ValidationError(f"{len(coords)} coords but {len(feats)} feature rows")
        if len(coords) and len(np.unique(coords, axis=0)) != len(coords):
            raise ValidationError("duplicate voxel coordinates")
        self.coords = coords
        self.features = feats
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (len(coords),):
                raise ValidationError(f"labels shape {lab.shape} does not match {len(coords)} voxels")
            self.labels = np.ascontiguousarray(lab.astype(np.uint16))

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def channels(self) -> int:
        return self.features.shape[1]

    def centers(self) -> np.ndarray:
        """World-space centers of all voxels, (N, 3) float64."""
        return self.origin + (self.coords.astype(np.float64) + 0.5) * self.voxel_size


def _group_by_coord(coords: np.ndarray):
    """Group rows of an (N, 3) int array by value, in canonical (z, y, x) order.

    Returns (order, starts, counts, unique_coords): ``order`` permutes rows
    into sorted-by-group position, ``starts`` indexes group beginnings within
    that permutation.
    """
    order = np.lexsort((coords[:, 0], coords[:, 1], coords[:, 2]))
    srt = coords[order]
    if len(srt) == 0:
        return order, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), srt
    change = np.any(srt[1:] != srt[:-1], axis=1)
    starts = np.concatenate([[0], np.flatnonzero(change) + 1])
    counts = np.diff(np.append(starts, len(srt)))
    return order, starts, counts, srt[starts]


def _majority_labels(group_ids: np.ndarray, labels: np.ndarray, n_groups: int) -> np.ndarray:
    """Per-group majority vote over u16 labels, ties broken by smallest label."""
    pair = group_ids.astype(np.int64) * (VOID_LABEL + 1) + labels.astype(np.int64)
    uniq, cnt = np.unique(pair, return_counts=True)
    gid = uniq // (VOID_LABEL + 1)
    lab = uniq % (VOID_LABEL + 1)
    # Sort by (group, count desc, label asc); first row per group wins.
    pick = np.lexsort((lab, -cnt, gid))
    firsts = np.unique(gid[pick], return_index=True)[1]
    out = np.full(n_groups, VOID_LABEL, dtype=np.uint16)
    out[gid[pick][firsts]] = lab[pick][firsts].astype(np.uint16)
    return out


def voxelize(cloud: PointCloud, voxel_size: float, origin=(0.0, 0.0, 0.0)) -> SparseVoxelGrid:
    """Bin a point cloud into a sparse voxel grid.

    Each voxel's feature is the arithmetic mean of its member points' colors;
    its label (when the cloud carries labels) is the majority vote with ties
    going to the smallest label id.  An empty cloud yields an empty grid.
    """
    if voxel_size <= 0.0:
        raise ValidationError(f"voxel_size must be positive, got {voxel_size}")
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    idx = np.floor((cloud.positions - origin) / voxel_size).astype(np.int32)
    order, starts, counts, uniq = _group_by_coord(idx)
    if len(uniq) == 0:
        return SparseVoxelGrid(origin, voxel_size, np.zeros((0, 3), np.int32), np.zeros((0, 3), np.float32))
    sums = np.add.reduceat(cloud.colors[order], starts, axis=0)
    feats = (sums / counts[:, None]).astype(np.float32)
    labels = None
    if cloud.labels is not None:
        gids = np.repeat(np.arange(len(uniq)), counts)
        labels = _majority_labels(gids, cloud.labels[order], len(uniq))
    return SparseVoxelGrid(origin, voxel_size, uniq, feats, labels)


def voxel_center(grid: SparseVoxelGrid, i: int) -> np.ndarray:
    """World-space center of voxel row i: origin + (coord + 0.5) * size."""
    if not 0 <= i < grid.n:
        raise IndexError(f"voxel index {i} out of range [0, {grid.n})")
    return grid.origin + (grid.coords[i].astype(np.float64) + 0.5) * grid.voxel_size


def coarsen(grid: SparseVoxelGrid, stride: int):
    """Merge voxels into stride-sized blocks for a coarser pyramid level.

    Coarse coordinate is floor(fine / stride) (floor semantics on negatives),
    coarse feature the mean of member fine features, coarse size the fine
    size times stride.  Returns the coarse grid plus an N-vector mapping each
    fine voxel row to its coarse row.
    """
    stride = int(stride)
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    coarse_idx = grid.coords // stride
    order, starts, counts, uniq = _group_by_coord(coarse_idx)
    fine_to_coarse = np.empty(grid.n, dtype=np.int64)
    gids = np.repeat(np.arange(len(uniq)), counts)
    fine_to_coarse[order] = gids
    if len(uniq) == 0:
        empty = SparseVoxelGrid(grid.origin, grid.voxel_size * stride,
                                np.zeros((0, 3), np.int32), np.zeros((0, grid.channels), np.float32))
        return empty, fine_to_coarse
    sums = np.add.reduceat(grid.features[order].astype(np.float64), starts, axis=0)
    feats = (sums / counts[:, None]).astype(np.float32)
    labels = None
    if grid.labels is not None:
        labels = _majority_labels(gids, grid.labels[order], len(uniq))
    coarse = SparseVoxelGrid(grid.origin, grid.voxel_size * stride, uniq, feats, labels)
    return coarse, fine_to_coarse
