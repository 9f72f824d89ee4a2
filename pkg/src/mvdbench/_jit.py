"""Numba switch.

Set ``MVDBENCH_DISABLE_NUMBA=1`` to run every hot kernel through its pure
numpy implementation instead of the compiled one. The flag is read once at
import time.
"""
from __future__ import annotations

import os

# prefer layers that load cleanly here; an outdated TBB only warns and falls back
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

_FLAG = os.environ.get("MVDBENCH_DISABLE_NUMBA", "0").strip().lower()

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    The decorated function is always compiled when numba exists, even if
    ``USE_NUMBA`` is off, so benchmarks can compare both paths in one process.
    """
    if HAS_NUMBA:
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return wrap


if HAS_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def set_threads(n: int) -> int:
    """Set the compiled-kernel thread count, clamped to what numba allows.

    Returns the count actually in effect.
    """
    if not HAS_NUMBA:
        return 1
    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n
