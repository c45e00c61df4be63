"""Build script for the optional compiled kernels.

The package works without the extension; ``stochwave.kernels`` falls back to
numpy/scipy when ``stochwave._ckernels`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("STOCHWAVE_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "stochwave._ckernels",
                    ["src/stochwave/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
