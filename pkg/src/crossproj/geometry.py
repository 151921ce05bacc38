"""Pinhole camera model: perspective projection, back-projection, frustum tests.

Conventions
-----------
- Camera space follows OpenCV: +x right, +y down, +z forward; the camera
  looks along +z and depth means camera-space z (not ray length).
- Pixel coordinates (u, v) are continuous, with integer values at pixel
  centers.  Rasterization rounds to the nearest integer, ties toward +inf.
- Poses are stored camera-to-world; the projection matrix uses the inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ValidationError

__all__ = [
    "Intrinsics",
    "Pose",
    "Camera",
    "Projection",
    "compose_m",
    "project",
    "project_points",
    "unproject",
    "in_frustum",
    "pixel_round",
]


def pixel_round(x):
    """Round continuous pixel coordinates to the nearest integer.

    Ties round toward +inf (floor(x + 0.5)) so that Python, numpy, and the
    native kernel agree bit-for-bit.  Works on scalars and arrays.
    """
    if isinstance(x, np.ndarray):
        return np.floor(x + 0.5).astype(np.int64)
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole calibration: focal lengths, principal point, and image size."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (self.width > 0 and self.height > 0):
            raise ValidationError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )


_ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class Pose:
    """Rigid camera-to-world transform (rotation + translation, meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {r.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValidationError("pose contains non-finite values")
        if np.max(np.abs(r.T @ r - np.eye(3))) > _ROTATION_TOL:
            raise ValidationError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ROTATION_TOL:
            raise ValidationError("rotation determinant is not +1 (reflection?)")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        """Build from a 4x4 (or 3x4) camera-to-world matrix."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape not in ((4, 4), (3, 4)):
            raise ValidationError(f"pose matrix must be 4x4 or 3x4, got {m.shape}")
        if m.shape == (4, 4) and np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > _ROTATION_TOL:
            raise ValidationError("last row of a 4x4 pose must be [0 0 0 1]")
        return cls(m[:3, :3], m[:3, 3])

    def matrix4(self) -> np.ndarray:
        """4x4 homogeneous camera-to-world matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def world_to_camera(self) -> np.ndarray:
        """3x4 [R|t] mapping world points into camera space (inverse pose)."""
        r_wc = self.rotation.T
        return np.hstack([r_wc, (-r_wc @ self.translation).reshape(3, 1)])


def compose_m(intrinsics: Intrinsics, pose: Pose) -> np.ndarray:
    """Projection matrix: calibration times world-to-camera transform (3x4)."""
    return intrinsics.matrix @ pose.world_to_camera()


@dataclass(frozen=True)
class Camera:
    """An intrinsics/pose pair with the cached 3x4 projection matrix."""

    intrinsics: Intrinsics
    pose: Pose
    m: np.ndarray = field(init=False)

    def __post_init__(self):
        m = compose_m(self.intrinsics, self.pose)
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height

    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.pose.translation


class Projection(NamedTuple):
    """Result of projecting one world point: pixel coordinates plus depth.

    ``depth`` is camera-space z.  When the point lies at or behind the
    camera plane the result is flagged instead of raising, so bulk callers
    can process every voxel without aborting; u and v are NaN in that case.
    """

    u: float
    v: float
    depth: float

    @property
    def behind(self) -> bool:
        return self.depth <= 0.0


def project(camera: Camera, point) -> Projection:
    """Perspective-project one world point through the camera."""
    x, y, z = (float(c) for c in point)
    m = camera.m
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
    if w <= 0.0:
        return Projection(math.nan, math.nan, w)
    hu = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]
    hv = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]
    return Projection(hu / w, hv / w, w)


def project_points(camera: Camera, points: np.ndarray):
    """Vectorized projection of an (N, 3) array of world points.

    Returns (u, v, z) float64 arrays of length N.  Rows with z <= 0 carry
    NaN pixel coordinates.  The arithmetic is written as explicit
    elementwise expressions so the native kernel can reproduce it exactly.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"points must be (N, 3), got {pts.shape}")
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    m = camera.m
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
    ok = w > 0.0
    safe_w = np.where(ok, w, 1.0)
    u = (m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]) / safe_w
    v = (m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]) / safe_w
    u = np.where(ok, u, np.nan)
    v = np.where(ok, v, np.nan)
    return u, v, w


def unproject(camera: Camera, u: float, v: float, depth: float) -> np.ndarray:
    """Lift a pixel with known depth back to a world point (3-vector).

    Inverse of :func:`project` at continuous pixel coordinates; the depth is
    camera-space z in meters and must be positive.
    """
    if depth <= 0.0:
        raise ValidationError(f"depth must be positive, got {depth}")
    intr = camera.intrinsics
    ur, vr = pixel_round(float(u)), pixel_round(float(v))
    if not (0 <= ur < intr.width and 0 <= vr < intr.height):
        raise ValidationError(
            f"pixel ({u}, {v}) outside image {intr.width}x{intr.height}"
        )
    x_cam = (u - intr.cx) * depth / intr.fx
    y_cam = (v - intr.cy) * depth / intr.fy
    cam = np.array([x_cam, y_cam, depth], dtype=np.float64)
    return camera.pose.rotation @ cam + camera.pose.translation


def in_frustum(camera: Camera, point) -> bool:
    """True iff the point projects in front of the camera and inside the image.

    Bounds are inclusive at both ends after rounding: 0 <= u <= width-1 and
    0 <= v <= height-1.  Any point with camera-space z <= 0 fails regardless
    of where its wrapped coordinates would land.
    """
    p = project(camera, point)
    if p.behind:
        return False
    ur, vr = pixel_round(p.u), pixel_round(p.v)
    return 0 <= ur <= camera.width - 1 and 0 <= vr <= camera.height - 1
