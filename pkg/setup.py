import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("EXAMFORGE_SKIP_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("examforge._diff_c", ["src/examforge/_diff_c.pyx"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
