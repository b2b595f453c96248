"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile degrades gracefully to a source-only
install.  Build in place for development with:

    python setup.py build_ext --inplace
"""

import sys

from setuptools import Extension, setup


def make_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"hcflow: Cython/numpy unavailable ({exc}); "
              "installing without the compiled kernel core.", file=sys.stderr)
        return []
    ext = Extension(
        "hcflow.kernels._core",
        ["src/hcflow/kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=make_extensions())
