"""Build script: compiles the optional Cython stepper kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""

import numpy
from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Degrade to the pure-Python package if the C toolchain is unusable."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: skipping Cython kernels ({exc}); "
                  "ksefix will use the numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); "
                  "ksefix will use the numpy fallback")


def extensions():
    from Cython.Build import cythonize
    from setuptools import Extension

    return cythonize(
        [Extension(
            "ksefix._kernels",
            ["src/ksefix/_kernels.pyx"],
            extra_compile_args=["-O3"],
            include_dirs=[numpy.get_include()],
        )],
        language_level=3,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
