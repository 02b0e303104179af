import os

from setuptools import setup

ext_modules = []
if os.environ.get("FSMA_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension(
                "fsma._kernels",
                ["src/fsma/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # keep a*b+c as two roundings so results match the numpy fallback
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
            )],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
