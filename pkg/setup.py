from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:  # no build toolchain: install the pure-Python fallback only
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("xaistab._kernels", ["src/xaistab/_kernels.pyx"], include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
