"""Numba dispatch.

Kernels are written once as plain Python loops and compiled with ``numba.njit``
when numba is importable and ``PATHOED_DISABLE_NUMBA`` is unset (or ``0``).
Each kernel module also provides a vectorized numpy twin; :data:`USE_NUMBA`
decides which one the public wrappers call.
"""
import os

_flag = os.environ.get("PATHOED_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


USE_NUMBA = HAVE_NUMBA
