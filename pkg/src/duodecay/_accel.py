"""Numba switch shared by the hot kernels.

``DUODECAY_NUMBA=0`` forces the pure-numpy code paths even when numba is
importable.  ``DUODECAY_THREADS`` caps the number of concurrent sweep
workers; the compiled kernels themselves are serial.
"""
import os
import warnings

_flag = os.environ.get("DUODECAY_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False
    if _wanted:
        warnings.warn("numba could not be imported; using numpy kernels")

USE_NUMBA = HAVE_NUMBA and _wanted


def thread_cap():
    """Worker count allowed by ``DUODECAY_THREADS`` (default: all cores)."""
    raw = os.environ.get("DUODECAY_THREADS")
    ncpu = os.cpu_count() or 1
    if not raw:
        return ncpu
    try:
        return max(1, min(int(raw), ncpu))
    except ValueError:
        return ncpu


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def deco(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return deco

