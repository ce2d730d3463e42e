from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "renormlab._ctape",
        ["src/renormlab/_ctape.pyx"],
        # -fcx-limited-range: inline complex multiplies (no libgcc edge-case
        # call); non-finite values still propagate as non-finite, which is
        # all the overflow detection upstream relies on
        extra_compile_args=["-O3", "-fcx-limited-range"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
