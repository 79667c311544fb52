"""Build script for the optional compiled assembly kernels.

The package is fully functional without the extension; `kvdamage._kernels`
falls back to the vectorized numpy implementation when the compiled module
is absent (see benchmarks/bench_kernels.py for the speed comparison).
"""

import os

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    # no cython/numpy at build time: ship pure python
    cythonize = None

if cythonize is not None and os.path.exists("src/kvdamage/_kernels/_core.pyx"):
    extensions = cythonize(
        [
            Extension(
                "kvdamage._kernels._core",
                ["src/kvdamage/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
