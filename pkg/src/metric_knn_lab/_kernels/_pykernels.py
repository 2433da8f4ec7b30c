"""Pure-NumPy versions of the compiled kernels (same contracts)."""

import numpy as np


def knn_select(keys, tie, k):
    keys = np.ascontiguousarray(keys, dtype=np.float64)
    tie = np.ascontiguousarray(tie, dtype=np.float64)
    nq, n = keys.shape
    out = np.empty((nq, k), dtype=np.int64)
    for q in range(nq):
        row = keys[q]
        trow = tie[0] if tie.shape[0] == 1 else tie[q]
        kth = np.partition(row, k - 1)[k - 1]
        cand = np.flatnonzero(row <= kth)
        order = np.lexsort((cand, trow[cand], row[cand]))
        out[q] = cand[order[:k]]
    return out


def first_diff_index(seqs, query):
    seqs = np.asarray(seqs, dtype=np.uint8)
    query = np.asarray(query, dtype=np.uint8)
    mismatch = seqs != query
    idx = np.argmax(mismatch, axis=1) + 1
    idx[~mismatch.any(axis=1)] = seqs.shape[1] + 1
    return idx.astype(np.int64)
