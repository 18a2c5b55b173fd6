import platform

import numpy as np
from setuptools import Extension, setup

# the hardware popcount instruction is baseline on every x86-64 CPU since ~2008
COMPILE_ARGS = ["-O3"] + (["-mpopcnt"] if platform.machine() in ("x86_64", "AMD64") else [])

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; genbo.tanimoto falls back to numpy
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "genbo._tanimoto",
                ["src/genbo/_tanimoto.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=COMPILE_ARGS,
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
