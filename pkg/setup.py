"""Build script for the optional compiled kernel extension.

The package works without the extension: ``sca._kernels`` falls back to
numpy implementations when ``sca._kernels._core`` is missing. Building
with Cython just makes the minimum-spanning-tree and layout kernels fast.
"""

import os
import sys

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("SCA_SKIP_EXTENSION"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        print("sca-topics: Cython or numpy unavailable, building pure-python package",
              file=sys.stderr)
        return []
    ext = Extension(
        "sca._kernels._core",
        ["src/sca/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
