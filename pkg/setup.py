"""Build the optional Cython kernels.

The package works without them: ``poppath.kernels`` falls back to the
pure-Python implementation when the extension cannot be imported.
Set ``POPPATH_NO_EXT=1`` to skip compilation entirely.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("POPPATH_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "poppath._kernels",
                    ["src/poppath/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
