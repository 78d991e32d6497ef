"""Build the optional compiled integrator kernel.

The extension is marked optional: if Cython or a C compiler is missing the
package still installs and falls back to the pure-Python kernel.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "hardycone._kernels._ckernels",
                ["src/hardycone/_kernels/_ckernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
