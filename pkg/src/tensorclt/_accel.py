"""Numba switch.

The hot loops in :mod:`tensorclt.kernels` exist twice: an ``@njit`` version and
a vectorised numpy version.  Setting ``TENSORCLT_PURE_NUMPY=1`` in the
environment (before import) selects the numpy path even when numba is
installed.  Both paths consume the same random draws, so results agree to
rounding.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

PURE_NUMPY = os.environ.get("TENSORCLT_PURE_NUMPY", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not PURE_NUMPY


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, else a no-op decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def deco(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return deco


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
