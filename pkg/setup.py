import os

import numpy as np
from setuptools import Extension, setup

# Bit-for-bit agreement with the pure-Python fallback needs strict IEEE
# arithmetic: no fast-math, no fused multiply-add contraction.
compile_args = ["-O3", "-ffp-contract=off", "-fno-fast-math"]

extensions = [
    Extension(
        "skipfree._ckernels",
        ["src/skipfree/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=compile_args,
    )
]

if os.environ.get("SKIPFREE_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
