"""Build the optional Cython trajectory kernel.

The package works without it: ``mdpagg.kernels`` falls back to a
pure-Python walker when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MDPAGG_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "mdpagg._walk",
                    ["src/mdpagg/_walk.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
