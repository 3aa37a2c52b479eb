"""Build script: compiles the optional Cython NNLS kernel.

The package works without the extension (a pure-numpy solver is used as
fallback), so build failures here are tolerated by installing with the
extension skipped rather than hard-failing the whole install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "probelift._nnls_cy",
                ["src/probelift/_nnls_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
