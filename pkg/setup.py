"""Build script: compiles the optional event-loop accelerator.

The package is fully functional without the extension (a pure-Python
engine is selected at import time); the build therefore tolerates a
missing compiler or Cython and falls back to a pure install.
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
                "packetgraph._simcore",
                sources=["src/packetgraph/_simcore.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"] if sys.platform != "win32" else ["/O2"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"packetgraph: skipping accelerator build ({exc!r})\n")

setup(ext_modules=ext_modules)
