import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fall back to the pure-Python kernel
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("SCMS_NO_EXTENSION"):
    ext_modules = cythonize(
        [
            Extension(
                "scms._p256_ext",
                ["src/scms/_p256_ext.pyx", "src/scms/p256_core.c"],
                include_dirs=["src/scms"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
