import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the package falls back at import
    cythonize = None

NP_RANDOM_LIB = os.path.join(os.path.dirname(np.__file__), "random", "lib")

extensions = []
if cythonize is not None and not os.environ.get("REWARDTEACH_NO_EXT"):
    extensions = cythonize(
        [
            Extension(
                "rewardteach._kernel",
                ["src/rewardteach/_kernel.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[NP_RANDOM_LIB],
                libraries=["npyrandom", "m"],
                # no fast-math / fma contraction: results must match the Python loop bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
