import os

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

directives = {
    "language_level": "3",
    "boundscheck": False,
    "wraparound": False,
    "cdivision": True,
    "initializedcheck": False,
    "embedsignature": True,
}

extensions = [
    Extension(
        "heatdrift._ckernels",
        ["src/heatdrift/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

# HEATDRIFT_NO_EXT=1 installs the pure-Python package only.
if os.environ.get("HEATDRIFT_NO_EXT"):
    extensions = []

setup(ext_modules=cythonize(extensions, compiler_directives=directives) if extensions else [])
