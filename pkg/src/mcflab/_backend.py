"""Kernel backend selection.

Hot per-point kernels are compiled with numba when it is importable and
``MCFLAB_NUMBA`` is not set to ``0``; otherwise the pure-numpy versions are
used.  The flag is read once at import time.
"""
import os

__all__ = ("USE_NUMBA", "BACKEND", "njit")


def _numba_requested():
    return os.environ.get("MCFLAB_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by MCFLAB_NUMBA")
    from numba import njit as _njit

    USE_NUMBA = True
except ImportError:
    _njit = None
    USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True)`` when enabled, identity otherwise."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)
