"""Link matrix construction, the z-buffer reference renderer, and pyramid remapping.

The link matrix binds each voxel to its projected pixel under one camera:
one (u, v, mask) row per voxel, mask=1 iff the voxel is visible in that
view.  Visibility is decided by comparing the projected camera-space depth
against the depth map within a tolerance delta (default: the voxel size).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .errors import ValidationError
from .geometry import Camera
from .voxelgrid import SparseVoxelGrid

__all__ = ["DepthMap", "LinkMatrix", "LinkConfig", "build_link", "render_depth", "remap_link", "link_stats"]


@dataclass
class DepthMap:
    """Per-pixel camera-space depth in meters; 0 marks invalid pixels."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float32))
        if v.ndim != 2:
            raise ValidationError(f"depth map must be 2-D (H, W), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("depth map contains non-finite values")
        if v.size and v.min() < 0.0:
            raise ValidationError("depth map contains negative values")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class LinkMatrix:
    """Per-voxel (u, v, mask) rows binding voxels to pixels of a WxH image."""

    u: np.ndarray
    v: np.ndarray
    mask: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.u = np.ascontiguousarray(np.asarray(self.u, dtype=np.int32))
        self.v = np.ascontiguousarray(np.asarray(self.v, dtype=np.int32))
        self.mask = np.ascontiguousarray(np.asarray(self.mask, dtype=np.uint8))
        if not (self.u.ndim == self.v.ndim == self.mask.ndim == 1):
            raise ValidationError("link columns must be 1-D")
        if not (len(self.u) == len(self.v) == len(self.mask)):
            raise ValidationError("link columns must have equal length")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(f"link pixel space must be positive, got {self.width}x{self.height}")
        vis = self.mask.astype(bool)
        if np.any(vis):
            uu, vv = self.u[vis], self.v[vis]
            if uu.min() < 0 or uu.max() >= self.width or vv.min() < 0 or vv.max() >= self.height:
                raise ValidationError("visible link row has (u, v) outside the pixel space")

    @property
    def n(self) -> int:
        return len(self.u)

    def rows(self) -> np.ndarray:
        """(N, 3) int view of the matrix: columns u, v, mask."""
        return np.stack([self.u, self.v, self.mask.astype(np.int32)], axis=1)


@dataclass(frozen=True)
class LinkConfig:
    """Depth-matching tolerance; "auto" means: use the grid's voxel size."""

    delta: Union[float, str] = "auto"

    def __post_init__(self):
        if isinstance(self.delta, str):
            if self.delta != "auto":
                raise ValidationError(f"delta must be a positive number or 'auto', got {self.delta!r}")
        elif not self.delta > 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")

    def resolve(self, grid: SparseVoxelGrid) -> float:
        return grid.voxel_size if self.delta == "auto" else float(self.delta)


def build_link(
    grid: SparseVoxelGrid,
    camera: Camera,
    depth: DepthMap,
    config: Optional[LinkConfig] = None,
) -> LinkMatrix:
    """Construct the link matrix for one view.

    For each voxel the center is projected and rounded to the nearest pixel;
    mask_i = 1 iff z' > 0, (u, v) lies inside the image, the depth map is
    valid there, and |d(u, v) - z'| <= delta.  Invisible rows keep their
    clamped projected coordinates.
    """
    config = config or LinkConfig()
    if (depth.width, depth.height) != (camera.width, camera.height):
        raise ValidationError(
            f"depth map is {depth.width}x{depth.height} but camera expects "
            f"{camera.width}x{camera.height}"
        )
    delta = config.resolve(grid)
    u, v, mask = _kernels.build_link(
        camera.m, grid.coords, grid.origin, grid.voxel_size, depth.values, delta
    )
    return LinkMatrix(u, v, mask, camera.width, camera.height)


def render_depth(grid: SparseVoxelGrid, camera: Camera) -> DepthMap:
    """Point-splat z-buffer over voxel centers; the classical visibility oracle.

    Each in-frustum center claims its rounded pixel with the minimum depth;
    untouched pixels are 0.
    """
    values = _kernels.render_depth(
        camera.m, grid.coords, grid.origin, grid.voxel_size, camera.width, camera.height
    )
    return DepthMap(values)


def link_stats(grid: SparseVoxelGrid, camera: Camera, link: LinkMatrix) -> dict:
    """Classify voxels under one view into visible/occluded/out-of-frustum.

    visible: mask=1 rows; out_of_frustum: center behind the camera or
    projecting outside the image; occluded: inside the frustum but failing
    the depth test (a nearer surface, or no valid depth at the pixel).
    """
    from .geometry import project_points

    if grid.n != link.n:
        raise ValidationError(f"grid has {grid.n} voxels but link has {link.n} rows")
    u, v, z = project_points(camera, grid.centers())
    front = z > 0.0
    ur = np.where(front, np.floor(u + 0.5), -1.0)
    vr = np.where(front, np.floor(v + 0.5), -1.0)
    in_frustum = front & (ur >= 0) & (ur <= camera.width - 1) & (vr >= 0) & (vr <= camera.height - 1)
    visible = link.mask.astype(bool)
    return {
        "visible": int(visible.sum()),
        "occluded": int((in_frustum & ~visible).sum()),
        "out_of_frustum": int((~in_frustum).sum()),
    }


def remap_link(link: LinkMatrix, ratio: int, new_width: int, new_height: int) -> LinkMatrix:
    """Remap link pixel coordinates to a coarser pyramid level.

    u' = min(floor(u / ratio), new_width - 1), likewise v'; masks are
    unchanged (the link is built once at input resolution).
    """
    ratio = int(ratio)
    if ratio < 1:
        raise ValidationError(f"ratio must be >= 1, got {ratio}")
    if new_width <= 0 or new_height <= 0:
        raise ValidationError(f"remapped size must be positive, got {new_width}x{new_height}")
    u = np.minimum(link.u // ratio, new_width - 1).astype(np.int32)
    v = np.minimum(link.v // ratio, new_height - 1).astype(np.int32)
    return LinkMatrix(u, v, link.mask.copy(), new_width, new_height)
