import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("TRENDLAG_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "trendlag.nn._kernels_cy",
                    ["src/trendlag/nn/_kernels_cy.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-march=native"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # No Cython toolchain: install pure Python, kernels fall back at import.
        ext_modules = []

setup(ext_modules=ext_modules)
