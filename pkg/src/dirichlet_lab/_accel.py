"""Numba switch.

Hot kernels are written twice: a numba ``@njit`` version and a pure-numpy
version.  Set ``DIRICHLET_LAB_PURE_NUMPY=1`` to force the numpy path (useful
for debugging and for the benchmark's reference timings).
"""

import os

_FLAG = "DIRICHLET_LAB_PURE_NUMPY"


def numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and numba_requested()


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return _numba.njit(*args, **kwargs)

    def wrap(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


def set_threads(n: int) -> None:
    if HAVE_NUMBA and n and n > 0:
        _numba.set_num_threads(min(n, _numba.config.NUMBA_NUM_THREADS))
