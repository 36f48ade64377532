"""Build script for the optional compiled split-search kernel.

The package works without the extension (a numpy fallback is selected at
import time); the Cython kernel just makes forest training faster.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "triagekit.forest._split_cy",
                ["src/triagekit/forest/_split_cy.pyx"],
            )
        ],
        language_level="3",
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"Cython unavailable, building pure-python only: {exc}")

setup(ext_modules=ext_modules)
