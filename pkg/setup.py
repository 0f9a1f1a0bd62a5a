"""Build script: compiles the optional segmentation kernel extension.

The package works without the extension (a pure-Python fallback is
selected at import time), so a failed compile is non-fatal.
"""
import sys

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "lift3d._native._fhcore",
                ["src/lift3d/_native/_fhcore.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover
    print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
