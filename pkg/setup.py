import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "elastictune.kernels._ext",
        sources=["src/elastictune/kernels/_ext.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
]

setup(
    # The compiled kernels are an optimization; the package falls back to the
    # numpy backend when the extension is unavailable.
    ext_modules=cythonize(extensions, language_level=3) if cythonize else [],
)
