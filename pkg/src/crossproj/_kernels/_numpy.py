"""Vectorized numpy implementations of the hot kernels.

This is the fallback backend and the semantic reference for the native
extension: every expression here is written so the compiled version can
reproduce it bit-for-bit (same operand order, no fused multiply-add, same
rounding and clamping rules).

All functions take raw arrays; dtype/contiguity normalization is the
caller's job (see linker/transfer wrappers).
"""

import numpy as np


def _project(m, coords, origin, voxel_size):
    """Project voxel centers: returns (hu, hv, w) float64 arrays.

    Center of a voxel = origin + (coord + 0.5) * voxel_size.  w is
    camera-space depth; hu/hv are pre-divide homogeneous pixel coordinates.
    """
    x = origin[0] + (coords[:, 0].astype(np.float64) + 0.5) * voxel_size
    y = origin[1] + (coords[:, 1].astype(np.float64) + 0.5) * voxel_size
    z = origin[2] + (coords[:, 2].astype(np.float64) + 0.5) * voxel_size
    hu = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]
    hv = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
    return hu, hv, w


def _round_pixels(hu, hv, w, width, height):
    """Perspective divide plus nearest-pixel rounding (ties toward +inf).

    Returns (ur, vr, ui, vi): rounded coordinates as float64 (NaN where
    w == 0) for bounds tests, and int32 coordinates clamped into the image
    for storage/lookup.  Non-finite values clamp to 0.
    """
    wz = w == 0.0
    safe_w = np.where(wz, 1.0, w)
    uf = np.where(wz, np.nan, hu / safe_w)
    vf = np.where(wz, np.nan, hv / safe_w)
    ur = np.floor(uf + 0.5)
    vr = np.floor(vf + 0.5)

    def clamp(xr, n):
        xi = np.where(xr >= n - 1, float(n - 1), np.where(xr >= 0.0, xr, 0.0))
        return xi.astype(np.int32)

    return ur, vr, clamp(ur, width), clamp(vr, height)


def voxel_depths(m, coords, origin, voxel_size):
    """Camera-space depth of every voxel center, float64 (N,)."""
    _, _, w = _project(m, coords, origin, voxel_size)
    return w


def build_link(m, coords, origin, voxel_size, depth, delta):
    """Per-voxel pixel binding with occlusion test.

    mask=1 iff the center projects in front of the camera, lands inside the
    image after rounding, the depth map is valid there, and |d - z'| <= delta.
    Stored (u, v) are the rounded coordinates, clamped into the image for
    invisible rows.  Returns (u int32, v int32, mask uint8).
    """
    height, width = depth.shape
    hu, hv, w = _project(m, coords, origin, voxel_size)
    ur, vr, ui, vi = _round_pixels(hu, hv, w, width, height)
    in_bounds = (w > 0.0) & (ur >= 0.0) & (ur <= width - 1) & (vr >= 0.0) & (vr <= height - 1)
    d = depth[vi, ui].astype(np.float64)
    mask = in_bounds & (d > 0.0) & (np.abs(d - w) <= delta)
    return ui, vi, mask.astype(np.uint8)


def render_depth(m, coords, origin, voxel_size, width, height):
    """Point-splat z-buffer: per-pixel minimum depth over voxel centers.

    Pixels no voxel lands on are 0 (invalid).  Returns float32 (H, W).
    """
    hu, hv, w = _project(m, coords, origin, voxel_size)
    ur, vr, ui, vi = _round_pixels(hu, hv, w, width, height)
    sel = (w > 0.0) & (ur >= 0.0) & (ur <= width - 1) & (vr >= 0.0) & (vr <= height - 1)
    buf = np.full(height * width, np.inf, dtype=np.float64)
    np.minimum.at(buf, vi[sel].astype(np.int64) * width + ui[sel], w[sel])
    out = np.where(np.isinf(buf), 0.0, buf).astype(np.float32)
    return out.reshape(height, width)


def scatter_winners(u, v, mask, depth, zcam):
    """Resolve pixel collisions among visible voxels.

    Winner per pixel is the voxel with the smallest |d(u, v) - z'|, ties
    going to the smallest voxel index.  Returns an (H, W) int64 map of
    winning voxel indices, -1 where no visible voxel lands.
    """
    height, width = depth.shape
    winner = np.full(height * width, -1, dtype=np.int64)
    sel = mask.astype(bool)
    if not np.any(sel):
        return winner.reshape(height, width)
    idx = np.flatnonzero(sel)
    pix = v[sel].astype(np.int64) * width + u[sel]
    res = np.abs(depth[v[sel], u[sel]].astype(np.float64) - zcam[sel])
    # Stable sort by (pixel, residual) keeps voxel index ascending on ties.
    order = np.lexsort((res, pix))
    pix_sorted = pix[order]
    first = np.ones(len(pix_sorted), dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    winner[pix_sorted[first]] = idx[order][first]
    return winner.reshape(height, width)


def gather(image, u, v, mask):
    """Per-voxel image lookup: row i = mask_i * image[v_i, u_i].

    Returns float32 (N, C); masked-out rows are zero.
    """
    n = len(u)
    out = np.zeros((n, image.shape[2]), dtype=np.float32)
    sel = mask.astype(bool)
    out[sel] = image[v[sel], u[sel]]
    return out
