"""Backend switch for the compiled kernels.

Set ``DISSIPATE_DISABLE_NUMBA=1`` in the environment to force the pure-numpy
path, e.g. for debugging or when numba is unavailable.
"""
import os

_flag = os.environ.get("DISSIPATE_DISABLE_NUMBA", "").strip().lower()
NUMBA_REQUESTED = _flag not in ("1", "true", "yes", "on")

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = NUMBA_REQUESTED and HAS_NUMBA


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it as-is."""
    if HAS_NUMBA:
        return numba.njit(cache=True)(func)
    return func
