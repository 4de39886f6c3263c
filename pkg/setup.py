"""Build the optional compiled kernel.

The Cython extension ``tauhusimi._kernels`` is optional: if Cython or a C
compiler is unavailable the package installs without it and falls back to
the numpy implementation in ``tauhusimi._kernels_py``.
"""
import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernel not built ({exc}); using numpy fallback", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback", file=sys.stderr)


def extensions():
    if os.environ.get("TAUHUSIMI_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "tauhusimi._kernels",
        ["src/tauhusimi/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    try:
        return cythonize(
            [ext],
            language_level=3,
            compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
        )
    except Exception as exc:  # noqa: BLE001
        print(f"warning: cythonize failed ({exc}); using numpy fallback", file=sys.stderr)
        return []


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
