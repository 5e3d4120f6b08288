"""Optional numba acceleration.

Set ``RDL_DISABLE_NUMBA=1`` to force the pure-numpy kernels.
"""
from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

NUMBA_DISABLED = os.environ.get("RDL_DISABLE_NUMBA", "").strip() not in ("", "0")
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, else a no-op."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
