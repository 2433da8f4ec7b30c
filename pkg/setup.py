import os

import numpy as np
from setuptools import setup

ext_modules = []
if not os.environ.get("METRIC_KNN_LAB_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "metric_knn_lab._kernels._ckernels",
                    ["src/metric_knn_lab/_kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    language="c++",
                )
            ],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )
    except ImportError:
        # no Cython: the pure-Python kernels are used at import time
        ext_modules = []

setup(ext_modules=ext_modules)
