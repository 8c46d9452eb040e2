from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "docstudy.metrics._lcs_fast",
                ["src/docstudy/metrics/_lcs_fast.pyx"],
                extra_compile_args=["-O2"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython available: install pure-Python only, the metrics package
    # falls back to its Python kernel at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
