import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


def extensions():
    if cythonize is None or os.environ.get("BUFSIM_NO_EXT"):
        return []
    ext = Extension(
        "bufsim._kernels",
        ["src/bufsim/_kernels.pyx"],
        # keep float results identical to the numpy fallback
        extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
