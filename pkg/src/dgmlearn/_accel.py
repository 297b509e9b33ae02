"""Numba switch.

Set ``DGMLEARN_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
fallback (useful for debugging and for checking the two paths agree).
"""

import os

USE_NUMBA = os.environ.get("DGMLEARN_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return _njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
