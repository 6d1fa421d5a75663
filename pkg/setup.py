"""Build the optional Cython Jacobi kernel.

If Cython or a C compiler is missing the package still installs and
falls back to the pure-Python kernel at import time.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "corrtensor.linalg._jacobi",
                ["src/corrtensor/linalg/_jacobi.pyx"],
                # keep IEEE semantics so results match the numpy fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
