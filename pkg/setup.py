import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

compile_args = ["-O3", "-fopenmp", "-ffp-contract=fast"]
if os.environ.get("CMF_PORTABLE", "0") != "1":
    compile_args.append("-march=native")

ext = Extension(
    "cmf._native",
    ["src/cmf/_native.pyx"],
    include_dirs=[np.get_include(), "src/cmf"],
    depends=["src/cmf/_kernels.h"],
    extra_compile_args=compile_args,
    extra_link_args=["-fopenmp"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level=3))
