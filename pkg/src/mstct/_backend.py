"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting the
environment variable ``MSTCT_DISABLE_NUMBA=1`` forces the vectorised numpy
path instead; the flag is read once at import time.
"""

import os

_DISABLED = os.environ.get("MSTCT_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("numba disabled by MSTCT_DISABLE_NUMBA")
    import numba

    # the bundled TBB is too old for numba and only produces a warning
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def use_numba():
    return HAVE_NUMBA


def set_threads(n):
    """Pin the number of numba worker threads (no-op on the numpy path)."""
    if n is None or not HAVE_NUMBA:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
