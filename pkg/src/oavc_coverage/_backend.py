"""Kernel backend selection.

Hot kernels are compiled with numba when it is importable. Setting the
environment variable ``OAVC_DISABLE_NUMBA=1`` before import forces the
pure-numpy implementations.
"""

import os

DISABLE_ENV = "OAVC_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def numba_requested():
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba when the numba backend is active.

    Under the numpy backend the plain Python function is returned, so the
    loop-style kernels still run (slowly) and stay usable as references.
    """
    if not USE_NUMBA:
        return func
    return numba.njit(cache=True, fastmath=False)(func)
