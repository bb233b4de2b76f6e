"""Build the optional compiled kernels.

The hot O(n^2) loops (biased MMD^2 pair sums for the energy and Gaussian
kernels) live in a small Cython extension. The package works without it:
``elicit.backend`` falls back to the numpy implementation when the compiled
module is missing or when ELICIT_PURE_PYTHON=1 is set.

Standalone usage: python setup.py build_ext --inplace
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "elicit.backend._kernels",
                sources=["src/elicit/backend/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )

setup(ext_modules=ext_modules)
