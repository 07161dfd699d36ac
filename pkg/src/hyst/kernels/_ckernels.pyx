# cython: language_level=3
"""Compiled scoring kernels; contract mirrors _pykernels exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def bm25_accumulate(
    cnp.int64_t[::1] doc_idx,
    double[::1] tf,
    cnp.int64_t[::1] indptr,
    double[::1] idf,
    double[::1] norm,
    double k1,
    Py_ssize_t n_docs,
):
    out = np.zeros(n_docs, dtype=np.float64)
    cdef double[::1] scores = out
    cdef Py_ssize_t t, j, d
    cdef double w, f
    cdef Py_ssize_t n_terms = indptr.shape[0] - 1
    for t in range(n_terms):
        w = idf[t]
        for j in range(indptr[t], indptr[t + 1]):
            d = doc_idx[j]
            f = tf[j]
            # Same operand order as the fallback so results match bitwise.
            scores[d] += w * f * (k1 + 1.0) / (f + norm[d])
    return out


def dot_scores(
    double[:, ::1] matrix,
    cnp.int64_t[::1] cand_idx,
    double[::1] query,
):
    cdef Py_ssize_t n = cand_idx.shape[0]
    cdef Py_ssize_t dim = matrix.shape[1]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] sims = out
    cdef Py_ssize_t i, j, row
    cdef double acc
    for i in range(n):
        row = cand_idx[i]
        acc = 0.0
        for j in range(dim):
            acc += matrix[row, j] * query[j]
        sims[i] = acc
    return out


cdef inline bint _beats(double s_a, cnp.int64_t r_a, double s_b, cnp.int64_t r_b):
    # True when (s_a, r_a) ranks ahead of (s_b, r_b): higher score first,
    # ties broken by ascending id rank.
    if s_a != s_b:
        return s_a > s_b
    return r_a < r_b


def topk_indices(
    double[::1] scores,
    cnp.int64_t[::1] id_rank,
    Py_ssize_t k,
    bint positive_only=False,
):
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t i, size, child, parent, pos
    cdef double s
    cdef cnp.int64_t r

    if k <= 0 or n == 0:
        return np.zeros(0, dtype=np.int64)
    if k > n:
        k = n

    # Min-heap of the current best k, keyed so the weakest entry sits on top.
    heap_score = np.empty(k, dtype=np.float64)
    heap_rank = np.empty(k, dtype=np.int64)
    heap_pos = np.empty(k, dtype=np.int64)
    cdef double[::1] hs = heap_score
    cdef cnp.int64_t[::1] hr = heap_rank
    cdef cnp.int64_t[::1] hp = heap_pos

    size = 0
    for i in range(n):
        s = scores[i]
        if positive_only and s <= 0.0:
            continue
        r = id_rank[i]
        if size < k:
            # Sift up.
            child = size
            hs[child] = s
            hr[child] = r
            hp[child] = i
            size += 1
            while child > 0:
                parent = (child - 1) >> 1
                if _beats(hs[parent], hr[parent], hs[child], hr[child]):
                    hs[parent], hs[child] = hs[child], hs[parent]
                    hr[parent], hr[child] = hr[child], hr[parent]
                    hp[parent], hp[child] = hp[child], hp[parent]
                    child = parent
                else:
                    break
        elif _beats(s, r, hs[0], hr[0]):
            # Replace the weakest and sift down.
            hs[0] = s
            hr[0] = r
            hp[0] = i
            parent = 0
            while True:
                child = 2 * parent + 1
                if child >= k:
                    break
                if child + 1 < k and _beats(hs[child], hr[child], hs[child + 1], hr[child + 1]):
                    child += 1
                if _beats(hs[parent], hr[parent], hs[child], hr[child]):
                    hs[parent], hs[child] = hs[child], hs[parent]
                    hr[parent], hr[child] = hr[child], hr[parent]
                    hp[parent], hp[child] = hp[child], hp[parent]
                    parent = child
                else:
                    break

    result = np.empty(size, dtype=np.int64)
    cdef cnp.int64_t[::1] res = result
    order = np.lexsort((heap_rank[:size], -heap_score[:size]))
    cdef cnp.int64_t[::1] ord_v = order
    for i in range(size):
        res[i] = hp[ord_v[i]]
    return result
