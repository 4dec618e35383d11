"""Build script for the optional compiled kernel backend.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile downgrades to a warning instead of
aborting the install.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"tmlab: skipping compiled kernels ({exc})", file=sys.stderr)
        return []
    # -O3 vectorizes the elementwise sweeps; arithmetic stays IEEE-exact
    # (no fast-math, and the generic x86-64 target has no FMA to contract
    # into), so both backends keep producing identical bits
    flags = ["-O3"] if not sys.platform.startswith("win") else ["/O2"]
    ext = Extension(
        "tmlab.kernels._core",
        sources=["src/tmlab/kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=flags,
    )
    return cythonize([ext], language_level=3)


try:
    setup(ext_modules=_extensions())
except SystemExit:
    raise
except Exception as exc:  # build toolchain missing: install pure-python
    print(f"tmlab: compiled kernels unavailable, using numpy backend ({exc})",
          file=sys.stderr)
    setup(ext_modules=[])
