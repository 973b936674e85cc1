"""Build script: compiles the optional Cython resampling kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed. Set VIBRODIAG_NO_EXT=1
to skip the build entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("VIBRODIAG_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "vibrodiag._kernels._polyphase",
                    ["src/vibrodiag/_kernels/_polyphase.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
