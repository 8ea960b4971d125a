"""Optional numba acceleration.

Set ``DECONFLICT_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba
is missing the numpy path is used automatically.
"""
import logging
import os

logger = logging.getLogger(__name__)

_FLAG = "DECONFLICT_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def numba_enabled():
    """True when jitted kernels are both available and not disabled by env."""
    if not HAVE_NUMBA:
        return False
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


def njit(func):
    """``numba.njit(cache=True)`` if numba is importable, else identity."""
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True)(func)
