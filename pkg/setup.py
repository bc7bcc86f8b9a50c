"""Build script: compiles the optional CRC extension when Cython is available.

The package is fully functional without the extension; armstack.protocol
falls back to a pure-Python CRC at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "armstack.protocol._crc",
                ["src/armstack/protocol/_crc.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
