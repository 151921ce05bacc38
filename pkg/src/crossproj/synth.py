"""Synthetic box scenes with analytically exact depth.

Axis-aligned boxes keep every ray intersection in closed form, so these
scenes serve as unambiguous ground truth for visibility and transfer tests:
sample_cloud gives a labeled surface point cloud, analytic_depth the exact
per-pixel depth a perfect sensor would report.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import ValidationError
from .geometry import Camera
from .linker import DepthMap
from .voxelgrid import PointCloud

__all__ = ["Box", "BoxScene", "sample_cloud", "analytic_depth", "analytic_hits", "look_at_pose"]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with an RGB color in [0, 1] and a semantic label."""

    min_corner: Tuple[float, float, float]
    max_corner: Tuple[float, float, float]
    color: Tuple[float, float, float]
    label: int

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=np.float64)
        hi = np.asarray(self.max_corner, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValidationError("box corners must be 3-vectors")
        if np.any(hi < lo):
            raise ValidationError(f"box max corner {tuple(hi)} below min corner {tuple(lo)}")
        col = np.asarray(self.color, dtype=np.float64)
        if col.shape != (3,) or col.min() < 0.0 or col.max() > 1.0:
            raise ValidationError("box color must be RGB in [0, 1]")
        if not 0 <= int(self.label) < 65535:
            raise ValidationError(f"box label {self.label} out of range")
        object.__setattr__(self, "min_corner", tuple(float(x) for x in lo))
        object.__setattr__(self, "max_corner", tuple(float(x) for x in hi))
        object.__setattr__(self, "color", tuple(float(x) for x in col))
        object.__setattr__(self, "label", int(self.label))

    def face_areas(self) -> np.ndarray:
        """Areas of the 6 faces: -x, +x, -y, +y, -z, +z."""
        ext = np.asarray(self.max_corner) - np.asarray(self.min_corner)
        a = np.empty(6)
        a[0] = a[1] = ext[1] * ext[2]
        a[2] = a[3] = ext[0] * ext[2]
        a[4] = a[5] = ext[0] * ext[1]
        return a


@dataclass
class BoxScene:
    """A set of axis-aligned boxes plus the surface sampling density (pts/m^2).

    Room bounds default to the union bounding box of the boxes.
    """

    boxes: List[Box]
    density: float = 1000.0
    room_min: Optional[Tuple[float, float, float]] = None
    room_max: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        if self.density <= 0:
            raise ValidationError(f"density must be positive, got {self.density}")
        if not self.boxes:
            return
        los = np.array([b.min_corner for b in self.boxes])
        his = np.array([b.max_corner for b in self.boxes])
        if self.room_min is None:
            self.room_min = tuple(los.min(axis=0))
        if self.room_max is None:
            self.room_max = tuple(his.max(axis=0))
        lo = np.asarray(self.room_min)
        hi = np.asarray(self.room_max)
        if np.any(los < lo) or np.any(his > hi):
            raise ValidationError("boxes extend outside the room bounds")

    def bounds(self):
        return np.asarray(self.room_min, dtype=np.float64), np.asarray(self.room_max, dtype=np.float64)


# Face layout shared by the samplers: (fixed axis, side) for faces
# -x, +x, -y, +y, -z, +z.
_FACES = [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]


def sample_cloud(scene: BoxScene, seed: int) -> PointCloud:
    """Sample points uniformly on all box surfaces at the scene's density.

    Each face gets round(area * density) points; points carry the owning
    box's color and label.  Reproducible per seed.
    """
    rng = np.random.default_rng(seed)
    positions, colors, labels = [], [], []
    total_area = 0.0
    for box in scene.boxes:
        lo = np.asarray(box.min_corner)
        hi = np.asarray(box.max_corner)
        areas = box.face_areas()
        total_area += float(areas.sum())
        for (axis, side), area in zip(_FACES, areas):
            count = int(round(area * scene.density))
            if count == 0:
                continue
            pts = np.empty((count, 3))
            others = [a for a in range(3) if a != axis]
            for a in others:
                pts[:, a] = rng.uniform(lo[a], hi[a], size=count)
            pts[:, axis] = hi[axis] if side else lo[axis]
            positions.append(pts)
            colors.append(np.tile(box.color, (count, 1)))
            labels.append(np.full(count, box.label, dtype=np.uint16))
    if total_area == 0.0:
        raise ValidationError("scene has zero surface area, nothing to sample")
    return PointCloud(
        np.concatenate(positions),
        np.concatenate(colors),
        np.concatenate(labels),
    )


def _slab_intervals(origin, dirs, lo, hi):
    """Entry/exit ray parameters against one box (slab method), vectorized.

    dirs has shape (..., 3).  Misses come out with tmin > tmax.
    """
    tmin = np.full(dirs.shape[:-1], -np.inf)
    tmax = np.full(dirs.shape[:-1], np.inf)
    for a in range(3):
        d = dirs[..., a]
        nonzero = d != 0.0
        safe = np.where(nonzero, d, 1.0)
        t1 = (lo[a] - origin[a]) / safe
        t2 = (hi[a] - origin[a]) / safe
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
        inside = (origin[a] >= lo[a]) & (origin[a] <= hi[a])
        tmin = np.where(nonzero, np.maximum(tmin, near), np.where(inside, tmin, np.inf))
        tmax = np.where(nonzero, np.minimum(tmax, far), np.where(inside, tmax, -np.inf))
    return tmin, tmax


def analytic_hits(scene: BoxScene, camera: Camera):
    """Exact per-pixel ray cast through every pixel center.

    Returns (depth, box_index): camera-space z of the nearest surface hit
    (float64 H x W, 0 where no box is hit) and the index of the hit box
    (int32, -1 where none).
    """
    intr = camera.intrinsics
    us = np.arange(intr.width, dtype=np.float64)
    vs = np.arange(intr.height, dtype=np.float64)
    uu, vv = np.meshgrid(us, vs)
    # Camera-space ray directions with z = 1, so the ray parameter equals
    # camera-space depth of the hit point.
    dirs_cam = np.stack([(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy, np.ones_like(uu)], axis=-1)
    dirs = dirs_cam @ camera.pose.rotation.T
    origin = camera.position()

    best_t = np.full((intr.height, intr.width), np.inf)
    best_box = np.full((intr.height, intr.width), -1, dtype=np.int32)
    for k, box in enumerate(scene.boxes):
        lo = np.asarray(box.min_corner)
        hi = np.asarray(box.max_corner)
        tmin, tmax = _slab_intervals(origin, dirs, lo, hi)
        hit = (tmax >= tmin) & (tmax > 0.0)
        # Surface hit: entry point when outside the box, exit when inside.
        t = np.where(tmin > 0.0, tmin, tmax)
        better = hit & (t < best_t)
        best_t = np.where(better, t, best_t)
        best_box = np.where(better, k, best_box)
    depth = np.where(np.isinf(best_t), 0.0, best_t)
    return depth, best_box


def analytic_depth(scene: BoxScene, camera: Camera) -> DepthMap:
    """Exact depth map of the scene under the camera; 0 where no surface."""
    depth, _ = analytic_hits(scene, camera)
    return DepthMap(depth.astype(np.float32))


def look_at_pose(eye, target, up=(0.0, 0.0, 1.0)):
    """Camera-to-world pose looking from eye toward target.

    Camera axes: +x right, +y down, +z forward.  The up vector picks the
    roll; it must not be parallel to the viewing direction.
    """
    from .geometry import Pose

    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(fwd)
    if norm == 0.0:
        raise ValidationError("look_at eye and target coincide")
    fwd = fwd / norm
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        raise ValidationError("look_at up vector is parallel to the view direction")
    right = right / rn
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd], axis=1)
    return Pose(rot, eye)
