"""Numba switch.

Set ``SPINBUS_DISABLE_NUMBA=1`` to force the pure-numpy kernels (useful for
debugging and for the benchmark's baseline). If numba cannot be imported the
numpy path is used silently.
"""
import os

_FLAG = "SPINBUS_DISABLE_NUMBA"


def numba_requested():
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and numba_requested()
