"""Build script for the optional compiled loop kernel.

The package works without the extension (a pure-numpy kernel is
selected at import); build failures therefore degrade to a warning
instead of aborting the install.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/replaywm/_speedups.pyx"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # noqa: BLE001 - any build-chain failure falls back
    warnings.warn(f"building without the compiled kernel: {exc}")

setup(ext_modules=ext_modules)
