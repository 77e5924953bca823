"""Numba availability switch.

Set ``PHYSTRACK_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels even when numba is installed.
"""

from __future__ import annotations

import os

_DISABLED = os.environ.get("PHYSTRACK_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by PHYSTRACK_DISABLE_NUMBA")
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    _njit = None
    NUMBA_ENABLED = False


def jit(func):
    """Compile ``func`` with ``numba.njit(cache=True)`` when enabled, else return it unchanged."""
    if NUMBA_ENABLED:
        return _njit(cache=True)(func)
    return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
