"""Build script: compiles the native kernel extension when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so a failed native build degrades rather than breaks the
install.  Set CROSSPROJ_SKIP_NATIVE=1 to force a pure build.
"""

import os

from setuptools import Extension, setup


def native_extensions():
    if os.environ.get("CROSSPROJ_SKIP_NATIVE") == "1":
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "crossproj._kernels._native",
        ["src/crossproj/_kernels/_native.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # -ffp-contract=off keeps float expressions bit-identical to the
        # numpy fallback (no FMA fusion of a*b+c).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=native_extensions())
