import numpy as np
from setuptools import Extension, setup

# The compiled kernel module is optional: without a C toolchain the package
# falls back to the pure-NumPy kernels at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ssrpnet._kernels",
                ["src/ssrpnet/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
