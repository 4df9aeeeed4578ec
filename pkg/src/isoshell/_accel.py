"""
Numba switch.

Hot kernels are written once as plain Python/numpy and compiled with
``numba.njit`` unless the environment variable ``ISOSHELL_DISABLE_NUMBA``
is set to a truthy value (``1``, ``true``, ``yes``), or numba is missing.
Every kernel also has a vectorized numpy twin, so the fallback path is not
just the uncompiled loop.
"""
import os

_FLAG = os.environ.get("ISOSHELL_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENABLE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def jit(func):
    if ENABLE_NUMBA:
        return numba.njit(cache=True)(func)
    return func
