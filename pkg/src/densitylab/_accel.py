"""Numba switch.

Set ``DENSITYLAB_DISABLE_NUMBA=1`` to route every kernel through its pure
numpy twin.  Missing numba has the same effect.
"""
import os

DISABLED = os.environ.get("DENSITYLAB_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not DISABLED


def njit(*args, **kws):
    """``numba.njit(cache=True, nogil=True)`` when numba is usable, else identity."""
    if numba is None:
        if len(args) == 1 and callable(args[0]) and not kws:
            return args[0]
        return lambda f: f
    kws.setdefault("cache", True)
    kws.setdefault("nogil", True)
    return numba.njit(*args, **kws)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
