"""Build shim: compiles the optional accelerator extension.

The package works without the extension (a pure-Python twin of every kernel
ships in onroute._kernels.pure); compilation failures therefore downgrade to
a plain install instead of aborting.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "onroute._kernels._core",
                ["src/onroute/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    print(f"accelerator extension skipped: {exc}")
    ext_modules = []

setup(ext_modules=ext_modules)
