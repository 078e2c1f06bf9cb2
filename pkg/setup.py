"""Build script for the compiled kernel extension.

The package works without the extension (numpy fallback); building it is an
optimization, not a requirement, so failures here should surface as a missing
extension and not as a broken install.
"""

import platform

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    compile_args = ["-O3"]
    if platform.machine().lower() in ("x86_64", "amd64"):
        # POPCNT has been in every x86-64 chip since 2008; without the flag
        # gcc expands __builtin_popcountll to a bit-twiddle loop.
        compile_args.append("-mpopcnt")

    ext_modules = cythonize(
        [
            Extension(
                "hdopt._kernels",
                ["src/hdopt/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=compile_args,
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
