from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension(
            "cvqkdsim.dsp._lms",
            ["src/cvqkdsim/dsp/_lms.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )],
        language_level=3,
    )
except ImportError:
    pass  # pure-Python fallback is used at runtime

setup(ext_modules=ext_modules)
