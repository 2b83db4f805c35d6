"""Build the optional Cython density-matrix core.

If Cython or a C compiler is missing the package installs without it and
``isingcdr.kernels`` falls back to numpy.
"""

from setuptools import setup

ext_modules = []
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
                "isingcdr._kernels",
                sources=["src/isingcdr/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fcx-limited-range", "-march=native"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
