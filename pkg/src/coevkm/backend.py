"""Kernel backend selection: numba-jitted hot loops with a pure-numpy fallback.

The backend is chosen once at import time from the environment:

* ``COEVKM_BACKEND=numba``  force the jitted kernels (error if numba is missing)
* ``COEVKM_BACKEND=numpy``  force the vectorized numpy fallback
* unset / ``auto``          numba if importable, numpy otherwise

Both backends implement identical semantics; ``tests/test_backends.py`` pins
their agreement and ``python -m coevkm.benchmark`` compares their speed.
"""

from __future__ import annotations

import os

_VALID = ("auto", "numba", "numpy")


def _requested() -> str:
    req = os.environ.get("COEVKM_BACKEND", "auto").strip().lower()
    if req not in _VALID:
        raise ValueError(
            f"COEVKM_BACKEND must be one of {_VALID}, got {req!r}"
        )
    return req


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


_req = _requested()
if _req == "numpy":
    BACKEND = "numpy"
elif _req == "numba":
    if not _numba_available():
        raise ImportError("COEVKM_BACKEND=numba but numba is not importable")
    BACKEND = "numba"
else:
    BACKEND = "numba" if _numba_available() else "numpy"


def get_kernels(name: str | None = None):
    """Return the kernel module for `name` ('numba'|'numpy'), default the active backend."""
    which = name or BACKEND
    if which == "numba":
        from . import _kernels_numba as mod
    elif which == "numpy":
        from . import _kernels_numpy as mod
    else:
        raise ValueError(f"unknown backend {which!r}")
    return mod
