"""Kernel backend selection.

The compiled extension (`crossproj._kernels._native`, Cython) is preferred
when present; otherwise the numpy fallback is used.  Both expose the same
five functions with identical semantics.  CROSSPROJ_BACKEND=numpy|native
forces a backend (forcing `native` raises if the extension is missing).
"""

import os

from . import _numpy

_forced = os.environ.get("CROSSPROJ_BACKEND", "auto").strip().lower() or "auto"

if _forced == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
elif _forced in ("auto", "native"):
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        if _forced == "native":
            raise
        _impl = _numpy
        BACKEND = "numpy"
else:
    raise RuntimeError(f"unknown CROSSPROJ_BACKEND value: {_forced!r}")

voxel_depths = _impl.voxel_depths
build_link = _impl.build_link
render_depth = _impl.render_depth
scatter_winners = _impl.scatter_winners
gather = _impl.gather


def backend() -> str:
    """Name of the active backend: 'native' or 'numpy'."""
    return BACKEND


def available_backends():
    """All importable backend modules by name, for benchmarks and parity tests."""
    out = {"numpy": _numpy}
    try:
        from . import _native
        out["native"] = _native
    except ImportError:
        pass
    return out
