import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DILFERRO_PURE") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "dilferro._core",
                    ["src/dilferro/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython/numpy at build time: install the pure-Python fallback only.
        ext_modules = []

setup(ext_modules=ext_modules)
