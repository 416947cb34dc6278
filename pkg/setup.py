"""Builds the optional compiled kernel extension.

Set MMVS_SKIP_EXT=1 to install without the extension; the package then runs
on the pure-numpy kernel fallback.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MMVS_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "mvsweep._kernels_cy",
                    sources=["src/mvsweep/_kernels_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
