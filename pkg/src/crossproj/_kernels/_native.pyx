# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled kernels.

Semantics mirror crossproj._kernels._numpy bit-for-bit: identical operand
order in float expressions (the extension is built with -ffp-contract=off so
no FMA fusion happens), identical rounding (floor(x + 0.5)) and identical
clamping.  Keep the two files in sync; the parity test suite compares them
on randomized inputs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor

cnp.import_array()


cdef inline int _clampi(double xr, int n) noexcept nogil:
    # NaN and -inf land on 0, +inf on n-1; matches the numpy fallback.
    if xr >= n - 1:
        return n - 1
    elif xr >= 0.0:
        return <int> xr
    return 0


def voxel_depths(const double[:, ::1] m, const int[:, ::1] coords,
                 const double[::1] origin, double voxel_size):
    """Camera-space depth of every voxel center, float64 (N,)."""
    cdef Py_ssize_t n = coords.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] w = out
    cdef Py_ssize_t i
    cdef double x, y, z
    with nogil:
        for i in range(n):
            x = origin[0] + (coords[i, 0] + 0.5) * voxel_size
            y = origin[1] + (coords[i, 1] + 0.5) * voxel_size
            z = origin[2] + (coords[i, 2] + 0.5) * voxel_size
            w[i] = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
    return out


def build_link(const double[:, ::1] m, const int[:, ::1] coords,
               const double[::1] origin, double voxel_size,
               const float[:, ::1] depth, double delta):
    """Per-voxel pixel binding with occlusion test; see the numpy twin."""
    cdef Py_ssize_t n = coords.shape[0]
    cdef int height = <int> depth.shape[0]
    cdef int width = <int> depth.shape[1]
    u_arr = np.zeros(n, dtype=np.int32)
    v_arr = np.zeros(n, dtype=np.int32)
    m_arr = np.zeros(n, dtype=np.uint8)
    cdef int[::1] uo = u_arr
    cdef int[::1] vo = v_arr
    cdef unsigned char[::1] mo = m_arr
    cdef Py_ssize_t i
    cdef int ui, vi
    cdef double x, y, z, hu, hv, w, uf, vf, ur, vr, d
    with nogil:
        for i in range(n):
            x = origin[0] + (coords[i, 0] + 0.5) * voxel_size
            y = origin[1] + (coords[i, 1] + 0.5) * voxel_size
            z = origin[2] + (coords[i, 2] + 0.5) * voxel_size
            hu = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]
            hv = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]
            w = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
            if w == 0.0:
                continue  # u, v, mask stay 0
            uf = hu / w
            vf = hv / w
            ur = floor(uf + 0.5)
            vr = floor(vf + 0.5)
            ui = _clampi(ur, width)
            vi = _clampi(vr, height)
            uo[i] = ui
            vo[i] = vi
            if w > 0.0 and ur >= 0.0 and ur <= width - 1 and vr >= 0.0 and vr <= height - 1:
                d = <double> depth[vi, ui]
                if d > 0.0 and fabs(d - w) <= delta:
                    mo[i] = 1
    return u_arr, v_arr, m_arr


def render_depth(const double[:, ::1] m, const int[:, ::1] coords,
                 const double[::1] origin, double voxel_size,
                 int width, int height):
    """Point-splat z-buffer; per-pixel min depth, 0 where untouched."""
    buf_arr = np.full(<Py_ssize_t> height * width, np.inf, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t n = coords.shape[0]
    cdef Py_ssize_t i, p
    cdef int ui, vi
    cdef double x, y, z, hu, hv, w, ur, vr
    with nogil:
        for i in range(n):
            x = origin[0] + (coords[i, 0] + 0.5) * voxel_size
            y = origin[1] + (coords[i, 1] + 0.5) * voxel_size
            z = origin[2] + (coords[i, 2] + 0.5) * voxel_size
            hu = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z + m[0, 3]
            hv = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z + m[1, 3]
            w = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z + m[2, 3]
            if w <= 0.0:
                continue
            ur = floor(hu / w + 0.5)
            vr = floor(hv / w + 0.5)
            if ur >= 0.0 and ur <= width - 1 and vr >= 0.0 and vr <= height - 1:
                ui = <int> ur
                vi = <int> vr
                p = <Py_ssize_t> vi * width + ui
                if w < buf[p]:
                    buf[p] = w
    out = np.where(np.isinf(buf_arr), 0.0, buf_arr).astype(np.float32)
    return out.reshape(height, width)


def scatter_winners(const int[::1] u, const int[::1] v, const unsigned char[::1] mask,
                    const float[:, ::1] depth, const double[::1] zcam):
    """Per-pixel winning voxel (smallest |d - z'|, ties to smallest index)."""
    cdef int height = <int> depth.shape[0]
    cdef int width = <int> depth.shape[1]
    cdef Py_ssize_t n = u.shape[0]
    winner_arr = np.full(<Py_ssize_t> height * width, -1, dtype=np.int64)
    best_arr = np.full(<Py_ssize_t> height * width, np.inf, dtype=np.float64)
    cdef long long[::1] winner = winner_arr
    cdef double[::1] best = best_arr
    cdef Py_ssize_t i, p
    cdef double r
    with nogil:
        for i in range(n):
            if mask[i]:
                p = <Py_ssize_t> v[i] * width + u[i]
                r = fabs(<double> depth[v[i], u[i]] - zcam[i])
                if r < best[p]:
                    best[p] = r
                    winner[p] = i
    return winner_arr.reshape(height, width)


def gather(const float[:, :, ::1] image, const int[::1] u, const int[::1] v,
           const unsigned char[::1] mask):
    """Row i = mask_i * image[v_i, u_i]; float32 (N, C)."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t c = image.shape[2]
    out_arr = np.zeros((n, c), dtype=np.float32)
    cdef float[:, ::1] out = out_arr
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(n):
            if mask[i]:
                for k in range(c):
                    out[i, k] = image[v[i], u[i], k]
    return out_arr
