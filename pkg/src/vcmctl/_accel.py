"""Numba switch for the hot kernels.

Set ``VCMCTL_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. The jitted and fallback paths share source where the kernel is
inherently sequential (range coder) and are separate implementations where a
vectorized numpy form exists (block matching).
"""

import os

_DISABLED = os.environ.get("VCMCTL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    import numba

    NUMBA_ENABLED = True
except ImportError:
    numba = None
    NUMBA_ENABLED = False


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when enabled, identity otherwise.

    The undecorated function stays reachable as ``.py_func`` either way so
    tests and benchmarks can drive both paths in one process.
    """

    def wrap(f):
        if not NUMBA_ENABLED:
            f.py_func = f
            return f
        kwargs.setdefault("cache", True)
        return numba.njit(**kwargs)(f)

    if func is not None:
        return wrap(func)
    return wrap
