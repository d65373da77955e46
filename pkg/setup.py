"""Build script: compiles the optional LSTM kernel extension.

The package works without the extension (pure-numpy kernels are selected at
import time), so any build failure here downgrades to a warning instead of
breaking the install. Set WINSUM_PURE_PYTHON=1 to skip compilation entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, broken toolchain, ...
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building winsum.kernels._core failed ({exc}); "
            "falling back to the pure-numpy kernels",
            file=sys.stderr,
        )


ext_modules = []
if not os.environ.get("WINSUM_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "winsum.kernels._core",
                    ["src/winsum/kernels/_core.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        print("WARNING: Cython not available; skipping compiled kernels", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
