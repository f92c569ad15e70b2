import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # fallback backend is used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("speclap._backend._images",
                   ["src/speclap/_backend/_images.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
