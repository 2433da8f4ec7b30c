# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled hot loops: tie-aware k-nearest selection and prefix comparison."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef extern from *:
    """
    #include <algorithm>
    #include <cstddef>
    struct Entry {
        double key;
        double tie;
        Py_ssize_t idx;
    };
    static inline bool entry_before(const Entry &a, const Entry &b) {
        if (a.key != b.key) return a.key < b.key;
        if (a.tie != b.tie) return a.tie < b.tie;
        return a.idx < b.idx;
    }
    static void select_sorted(Entry *a, Py_ssize_t n, Py_ssize_t k) {
        std::nth_element(a, a + (k - 1), a + n, entry_before);
        std::sort(a, a + k, entry_before);
    }
    """
    cdef struct Entry:
        double key
        double tie
        Py_ssize_t idx
    void select_sorted(Entry *a, Py_ssize_t n, Py_ssize_t k) nogil

# below this k a single heap pass beats a full partition
HEAP_MAX_K = 24


cdef inline bint _before(const Entry *a, const Entry *b) noexcept nogil:
    # strict (key, tie, index) order
    if a.key != b.key:
        return a.key < b.key
    if a.tie != b.tie:
        return a.tie < b.tie
    return a.idx < b.idx


cdef void _sift_down(Entry *heap, Py_ssize_t size, Py_ssize_t pos) noexcept nogil:
    # max-heap on the (key, tie, index) order
    cdef Py_ssize_t child
    cdef Entry item = heap[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _before(&heap[child], &heap[child + 1]):
            child += 1
        if not _before(&item, &heap[child]):
            break
        heap[pos] = heap[child]
        pos = child
    heap[pos] = item


def knn_select(const double[:, ::1] keys, const double[:, ::1] tie, Py_ssize_t k):
    """Rows of the k smallest entries under the order (key, tie, index).

    Small ``k`` keeps the best entries seen so far in a bounded max-heap;
    larger ``k`` takes each row's k-th key from one vectorized partition,
    gathers everything up to it and orders only those.
    """
    cdef Py_ssize_t nq = keys.shape[0], n = keys.shape[1]
    cdef Py_ssize_t q, i, t, m
    cdef bint shared_tie = tie.shape[0] == 1
    cdef bint use_heap = k <= HEAP_MAX_K
    cdef Entry e
    cdef const double[::1] kth
    if not use_heap:
        kth = np.ascontiguousarray(np.partition(np.asarray(keys), k - 1, axis=1)[:, k - 1])
    out = np.empty((nq, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] res = out
    cdef Entry *buf = <Entry *> malloc((k if use_heap else n) * sizeof(Entry))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for q in range(nq):
                t = 0 if shared_tie else q
                if use_heap:
                    for i in range(k):
                        buf[i].key = keys[q, i]
                        buf[i].tie = tie[t, i]
                        buf[i].idx = i
                    for i in range(k // 2 - 1, -1, -1):
                        _sift_down(buf, k, i)
                    for i in range(k, n):
                        if keys[q, i] > buf[0].key:
                            continue
                        e.key = keys[q, i]
                        e.tie = tie[t, i]
                        e.idx = i
                        if _before(&e, &buf[0]):
                            buf[0] = e
                            _sift_down(buf, k, 0)
                    select_sorted(buf, k, k)
                else:
                    m = 0
                    for i in range(n):
                        if keys[q, i] <= kth[q]:
                            buf[m].key = keys[q, i]
                            buf[m].tie = tie[t, i]
                            buf[m].idx = i
                            m += 1
                    select_sorted(buf, m, k)
                for i in range(k):
                    res[q, i] = buf[i].idx
    finally:
        free(buf)
    return out


def first_diff_index(const unsigned char[:, ::1] seqs, const unsigned char[::1] query):
    """1-based index of the first symbol differing from ``query``; depth + 1 if none."""
    cdef Py_ssize_t n = seqs.shape[0], depth = seqs.shape[1], i, j
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    with nogil:
        for i in range(n):
            res[i] = depth + 1
            for j in range(depth):
                if seqs[i, j] != query[j]:
                    res[i] = j + 1
                    break
    return out
