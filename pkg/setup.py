"""Build script: compiles the interior-point hot loop as a C extension.

The extension is optional.  If Cython or a C compiler is unavailable the
package installs anyway and falls back to the pure-numpy kernel selected
at import time in consensus_rhc.qcqp.backend.
"""
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, header trouble, ...
            warnings.warn(f"C extension build skipped ({exc}); "
                          "falling back to the pure-Python solver kernel")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"building {ext.name} failed ({exc}); "
                          "falling back to the pure-Python solver kernel")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; installing without the "
                      "compiled solver kernel")
        return []
    ext = Extension(
        "consensus_rhc.qcqp._barrier",
        ["src/consensus_rhc/qcqp/_barrier.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
