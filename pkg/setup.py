"""Build script for the optional compiled scoring kernels.

The package is pure Python by default; if Cython and a C compiler are
available the hot scoring loops (BM25 accumulation, filtered top-k dot
products) are compiled. The extension is marked optional so a failed
build never blocks installation -- the numpy fallback is selected at
import time instead.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "hyst.kernels._ckernels",
                ["src/hyst/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
