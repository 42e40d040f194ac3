import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; drivefit.kernels falls back to numpy
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("DRIVEFIT_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "drivefit._kernel",
                ["src/drivefit/_kernel.pyx"],
                include_dirs=[np.get_include()],
                # no fast-math / fp contraction: the compiled and numpy paths must agree bitwise
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
