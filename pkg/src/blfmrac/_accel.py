"""Backend switch for the hot kernels.

Kernels are written once in numba-compatible numpy. When numba is
importable and ``BLFMRAC_DISABLE_NUMBA`` is unset (or ``0``), they are
compiled with ``numba.njit``; otherwise the same source runs as plain
Python/numpy.
"""

import os


def numba_disabled(value):
    """Interpret a ``BLFMRAC_DISABLE_NUMBA`` value."""
    return (value or "").strip().lower() not in ("", "0", "false", "no")


try:
    if numba_disabled(os.environ.get("BLFMRAC_DISABLE_NUMBA")):
        raise ImportError
    import numba
except ImportError:  # pragma: no cover - depends on environment
    numba = None

USE_NUMBA = numba is not None
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(func):
    if USE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
