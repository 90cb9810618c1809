import os

import numpy
from setuptools import Extension, setup

# The compiled kernels are optional at runtime (mfscan falls back to the
# numpy implementation if the extension is missing), but we always try to
# build them.  Set MFSCAN_SKIP_EXT=1 to install without the extension.
ext_modules = []
if not os.environ.get("MFSCAN_SKIP_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mfscan._kernels",
                ["src/mfscan/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
