"""Build the optional compiled kernel.

The package works without it: ``annulusgp._backend`` falls back to the
numpy implementation when the extension is missing.
"""
import os

import numpy
from setuptools import Extension, setup

extensions = []
if not os.environ.get("ANNULUSGP_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = cythonize(
            [
                Extension(
                    "annulusgp._kernels_ext",
                    ["src/annulusgp/_kernels_ext.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=extensions)
