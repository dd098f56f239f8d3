"""Build script: compiles the simulation core into ``mmpep._ccore``.

The same ``.py`` sources under ``src/mmpep/core`` are cythonized into a
second package, so the pure-Python modules stay importable as the fallback.
Set ``MMPEP_NO_EXT=1`` to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

CORE = ("engine", "channel", "sizing", "tcp", "rlc", "proxy", "metrics", "simulation")


def extensions():
    if os.environ.get("MMPEP_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    exts = [Extension(f"mmpep._ccore.{m}", [f"src/mmpep/core/{m}.py"],
                      extra_compile_args=["-O2"]) for m in CORE]
    return cythonize(exts, build_dir="build/cython",
                     compiler_directives={"language_level": "3", "binding": True})


setup(ext_modules=extensions())
