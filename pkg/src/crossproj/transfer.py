"""Bidirectional feature movement between voxels and pixels, plus view fusion.

Scatter writes voxel features into an image at their linked pixels; gather
reads image features back into voxel rows; fusion combines back-projected
features from several views per voxel.  Labels ride the same machinery with
a reserved void value for unassigned pixels/voxels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ValidationError
from .geometry import Camera
from .linker import DepthMap, LinkMatrix
from .voxelgrid import SparseVoxelGrid, VOID_LABEL

__all__ = [
    "FeatureMap2D",
    "FeatureSet3D",
    "FusionWeights",
    "scatter_3d_to_2d",
    "gather_2d_to_3d",
    "fuse_views",
    "paint_labels_3d_to_2d",
    "paint_labels_2d_to_3d",
    "concat_fuse_stub",
]

_WEIGHT_SUM_TOL = 1e-6


@dataclass
class FeatureMap2D:
    """Dense H x W x C image features, float32."""

    data: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if d.ndim != 3:
            raise ValidationError(f"2-D feature map must be (H, W, C), got shape {d.shape}")
        if 0 in d.shape[:2]:
            raise ValidationError(f"feature map dims must be positive, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValidationError("feature map contains non-finite values")
        self.data = d

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass
class FeatureSet3D:
    """Per-voxel N x C feature rows, float32."""

    data: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if d.ndim != 2:
            raise ValidationError(f"3-D feature set must be (N, C), got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValidationError("feature set contains non-finite values")
        self.data = d

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


@dataclass
class FusionWeights:
    """Explicit per-view, per-voxel scalar fusion weights, shape (R, N).

    Weights are nonnegative; rows for invalid views must be zero and the
    weights of each voxel's valid views must sum to 1 (checked against the
    validity masks inside fuse_views, where validity is known).
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValidationError(f"fusion weights must be (R, N), got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValidationError("fusion weights contain non-finite values")
        if w.size and w.min() < 0.0:
            raise ValidationError("fusion weights must be nonnegative")
        self.weights = w


def _check_link_image(link: LinkMatrix, height: int, width: int, what: str):
    if (link.width, link.height) != (width, height):
        raise ValidationError(
            f"link pixel space {link.width}x{link.height} does not match {what} {width}x{height}"
        )


def _winners(link: LinkMatrix, depth: DepthMap, grid: SparseVoxelGrid, camera: Camera) -> np.ndarray:
    if grid.n != link.n:
        raise ValidationError(f"grid has {grid.n} voxels but link has {link.n} rows")
    _check_link_image(link, depth.height, depth.width, "depth map")
    zcam = _kernels.voxel_depths(camera.m, grid.coords, grid.origin, grid.voxel_size)
    return _kernels.scatter_winners(link.u, link.v, link.mask, depth.values, zcam)


def scatter_3d_to_2d(
    features: FeatureSet3D,
    link: LinkMatrix,
    depth: DepthMap,
    grid: SparseVoxelGrid,
    camera: Camera,
) -> FeatureMap2D:
    """Project voxel features into an image (3D -> 2D direction).

    Pixel (u, v) takes the feature of the visible voxel linking there;
    pixels no visible voxel reaches are the zero vector.  When several
    visible voxels share a pixel the one with the smallest depth residual
    |d(u, v) - z'| wins, ties by smallest voxel index.
    """
    if features.n != link.n:
        raise ValidationError(f"feature set has {features.n} rows but link has {link.n}")
    winner = _winners(link, depth, grid, camera)
    out = np.zeros((link.height, link.width, features.channels), dtype=np.float32)
    hit = winner >= 0
    out[hit] = features.data[winner[hit]]
    return FeatureMap2D(out)


def gather_2d_to_3d(features: FeatureMap2D, link: LinkMatrix) -> FeatureSet3D:
    """Back-project image features onto voxels (2D -> 3D direction).

    Row i = mask_i * F2D(u_i, v_i): visible voxels copy the pixel feature,
    invisible voxels get the zero vector.
    """
    _check_link_image(link, features.height, features.width, "feature map")
    out = _kernels.gather(features.data, link.u, link.v, link.mask)
    return FeatureSet3D(out)


def paint_labels_3d_to_2d(
    labels: np.ndarray,
    link: LinkMatrix,
    depth: DepthMap,
    grid: SparseVoxelGrid,
    camera: Camera,
) -> np.ndarray:
    """Render per-voxel labels into an H x W uint16 label image.

    Same collision rule as scatter_3d_to_2d; pixels with no visible voxel
    get the void label (65535).
    """
    labels = np.asarray(labels)
    if labels.shape != (link.n,):
        raise ValidationError(f"labels shape {labels.shape} does not match {link.n} link rows")
    winner = _winners(link, depth, grid, camera)
    out = np.full((link.height, link.width), VOID_LABEL, dtype=np.uint16)
    hit = winner >= 0
    out[hit] = labels.astype(np.uint16)[winner[hit]]
    return out


def paint_labels_2d_to_3d(label_image: np.ndarray, link: LinkMatrix) -> np.ndarray:
    """Back-project a label image onto voxels; invisible voxels get void."""
    img = np.asarray(label_image)
    if img.ndim != 2:
        raise ValidationError(f"label image must be 2-D, got shape {img.shape}")
    _check_link_image(link, img.shape[0], img.shape[1], "label image")
    out = np.full(link.n, VOID_LABEL, dtype=np.uint16)
    vis = link.mask.astype(bool)
    out[vis] = img.astype(np.uint16)[link.v[vis], link.u[vis]]
    return out


def _check_views(per_view, validity):
    if len(per_view) < 1:
        raise ValidationError("fusion needs at least one view")
    if len(validity) != len(per_view):
        raise ValidationError(f"{len(per_view)} views but {len(validity)} validity masks")
    n, c = per_view[0].n, per_view[0].channels
    for k, fs in enumerate(per_view):
        if (fs.n, fs.channels) != (n, c):
            raise ValidationError(
                f"view {k} has shape ({fs.n}, {fs.channels}), expected ({n}, {c})"
            )
    masks = []
    for k, m in enumerate(validity):
        m = np.asarray(m)
        if m.shape != (n,):
            raise ValidationError(f"validity mask {k} has shape {m.shape}, expected ({n},)")
        masks.append(m.astype(bool))
    return n, c, np.stack(masks) if masks else np.zeros((0, n), bool)


def fuse_views(per_view, validity, policy="uniform") -> FeatureSet3D:
    """Fuse back-projected per-view features into one feature set.

    policy:
      - "uniform": average over each voxel's valid views; voxels valid in no
        view get the zero vector.
      - "max": channelwise maximum over valid views (max-pool fusion).
      - FusionWeights: explicit weighted sum, one scalar weight per voxel per
        view broadcast over channels.
    """
    n, c, valid = _check_views(per_view, validity)
    stack = np.stack([fs.data.astype(np.float64) for fs in per_view])  # (R, N, C)
    if isinstance(policy, FusionWeights):
        w = policy.weights
        if w.shape != (len(per_view), n):
            raise ValidationError(f"weights shape {w.shape} does not match ({len(per_view)}, {n})")
        if np.any(w[~valid] != 0.0):
            raise ValidationError("invalid views must carry zero weight")
        sums = w.sum(axis=0)
        any_valid = valid.any(axis=0)
        if np.any(np.abs(sums[any_valid] - 1.0) > _WEIGHT_SUM_TOL):
            raise ValidationError("weights over valid views must sum to 1 per voxel")
        out = np.einsum("rn,rnc->nc", w, stack)
        return FeatureSet3D(out.astype(np.float32))
    if policy == "uniform":
        cnt = valid.sum(axis=0).astype(np.float64)  # (N,)
        w = np.where(cnt > 0, valid / np.maximum(cnt, 1.0), 0.0)
        out = np.einsum("rn,rnc->nc", w, stack)
        return FeatureSet3D(out.astype(np.float32))
    if policy == "max":
        masked = np.where(valid[:, :, None], stack, -np.inf)
        out = masked.max(axis=0)
        out[~valid.any(axis=0)] = 0.0
        return FeatureSet3D(out.astype(np.float32))
    raise ValidationError(f"unknown fusion policy: {policy!r}")


def concat_fuse_stub(a, b):
    """Channelwise concatenation of two feature containers of the same kind."""
    if isinstance(a, FeatureSet3D) and isinstance(b, FeatureSet3D):
        if a.n != b.n:
            raise ValidationError(f"cannot concat feature sets with {a.n} and {b.n} rows")
        return FeatureSet3D(np.concatenate([a.data, b.data], axis=1))
    if isinstance(a, FeatureMap2D) and isinstance(b, FeatureMap2D):
        if (a.height, a.width) != (b.height, b.width):
            raise ValidationError(
                f"cannot concat feature maps of {a.width}x{a.height} and {b.width}x{b.height}"
            )
        return FeatureMap2D(np.concatenate([a.data, b.data], axis=2))
    raise ValidationError("concat requires two feature containers of the same kind")
