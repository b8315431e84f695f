"""Build script: compiles the optional Cython kernel core.

The package is fully functional without the extension (a numpy/scipy
fallback is selected at import time), so a failed compile only costs speed.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rnpm._kernels_cy",
                sources=["src/rnpm/_kernels_cy.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[
                    ("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION"),
                    # struct-based complex arithmetic inlines the multiplies;
                    # the native C99 path calls __muldc3 per product
                    ("CYTHON_CCOMPLEX", "0"),
                ],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"rnpm: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
