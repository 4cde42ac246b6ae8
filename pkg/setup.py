"""Build script for the optional compiled integrator kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time); building it just makes the master-equation heavy
paths several times faster.
"""

import os

from setuptools import Extension, setup

PYX = "src/fsqsim/_kernels/_lindblad_cy.pyx"

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    if not os.path.exists(PYX):
        raise ImportError(f"{PYX} not present")
    ext_modules = cythonize(
        [
            Extension(
                "fsqsim._kernels._lindblad_cy",
                [PYX],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
