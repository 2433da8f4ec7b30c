"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is used when it was built and importable; setting
``METRIC_KNN_LAB_PURE=1`` forces the fallback. ``BACKEND`` names the active one.
"""

import os

import numpy as np

from . import _pykernels as python

compiled = None
if not os.environ.get("METRIC_KNN_LAB_PURE"):
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"


def knn_select(keys, tie, k):
    """Indices of the ``k`` smallest entries per row, ordered by (key, tie, index).

    ``keys`` is ``(n_queries, n)``; ``tie`` is ``(n_queries, n)`` or ``(1, n)``.
    """
    keys = np.ascontiguousarray(keys, dtype=np.float64)
    tie = np.ascontiguousarray(np.atleast_2d(tie), dtype=np.float64)
    if not 1 <= k <= keys.shape[1]:
        raise ValueError(f"k={k} out of range for {keys.shape[1]} points")
    return _impl.knn_select(keys, tie, int(k))


def first_diff_index(seqs, query):
    """1-based first index where each row differs from ``query`` (depth + 1 if none)."""
    seqs = np.ascontiguousarray(seqs, dtype=np.uint8)
    query = np.ascontiguousarray(query, dtype=np.uint8)
    return _impl.first_diff_index(seqs, query)


__all__ = ["BACKEND", "compiled", "python", "knn_select", "first_diff_index"]
