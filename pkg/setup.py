"""Build script: compiles the optional gridsim raycast/BFS extension.

The package works without the extension (a pure numpy/Python fallback is
selected at import time); building it just makes environment stepping much
faster. `pip install -e . --no-build-isolation` builds it in place.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "goalnav.gridsim._kernels",
                ["src/goalnav/gridsim/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"goalnav: skipping compiled kernels ({exc}); using pure-Python fallback\n")

setup(ext_modules=ext_modules)
