"""Build script: compiles the scan kernels when a toolchain is available.

The compiled extension is optional.  If Cython or a C compiler is missing the
package installs anyway and falls back to the NumPy kernels at import time
(see multiscan.kernels).  Set MULTISCAN_NO_EXT=1 to skip compilation.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class optional_build_ext(build_ext):
    """Skip the extension (with a notice) instead of failing the install."""

    def run(self):
        try:
            build_ext.run(self)
        except (CCompilerError, ExecError, PlatformError) as exc:
            self._skip(exc)

    def build_extension(self, ext):
        try:
            build_ext.build_extension(self, ext)
        except (CCompilerError, ExecError, PlatformError, ValueError) as exc:
            self._skip(exc)

    @staticmethod
    def _skip(exc):
        sys.stderr.write(
            "multiscan: compiled kernels unavailable (%s); "
            "installing with pure NumPy kernels\n" % exc
        )


def extensions():
    if os.environ.get("MULTISCAN_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        sys.stderr.write("multiscan: Cython not found; skipping compiled kernels\n")
        return []
    ext = Extension(
        "multiscan.kernels._ext",
        ["src/multiscan/kernels/_ext.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
