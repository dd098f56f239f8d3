"""Picks the compiled core when it is importable, else the pure-Python one.

``MMPEP_BACKEND`` overrides the choice: ``python`` forces the fallback,
``cython`` fails loudly if the extension modules are missing, ``auto``
(the default) prefers compiled and falls back silently.
"""

from __future__ import annotations

import importlib
import os
from types import SimpleNamespace

ENV_VAR = "MMPEP_BACKEND"
MODULES = ("engine", "channel", "sizing", "tcp", "rlc", "proxy", "metrics", "simulation")
CHOICES = ("auto", "python", "cython")


def load(package: str) -> SimpleNamespace:
    return SimpleNamespace(**{m: importlib.import_module(f"{package}.{m}") for m in MODULES})


def select(preference: str | None = None) -> tuple[str, SimpleNamespace]:
    pref = (preference or os.environ.get(ENV_VAR, "auto")).strip().lower()
    if pref not in CHOICES:
        raise ValueError(f"{ENV_VAR} must be one of {', '.join(CHOICES)}, got {pref!r}")
    if pref in ("auto", "cython"):
        try:
            return "cython", load("mmpep._ccore")
        except ImportError:
            if pref == "cython":
                raise
    return "python", load("mmpep.core")


def compiled_available() -> bool:
    try:
        load("mmpep._ccore")
    except ImportError:
        return False
    return True


BACKEND, core = select()
