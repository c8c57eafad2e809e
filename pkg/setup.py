"""Build script for the optional compiled statevector core.

The package works without the extension (a NumPy fallback is selected at
import time), so a missing compiler downgrades the build instead of
failing it.
"""

import os

from setuptools import setup

_PYX = "src/qgsage/backend/_core_cy.pyx"

try:
    if not os.path.exists(_PYX):
        raise ImportError(f"{_PYX} not present")
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    extensions = cythonize(
        [
            Extension(
                "qgsage.backend._core_cy",
                sources=[_PYX],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
