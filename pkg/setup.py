import os

from setuptools import Extension, setup

# NLAR_LSE_NO_EXT=1 installs the pure-Python fallback only.
ext_modules = []
if not os.environ.get("NLAR_LSE_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "nlar_lse._ckernels",
                    ["src/nlar_lse/_ckernels.pyx"],
                    # keep a*b+c unfused so both backends round identically
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
