# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled union-find kernel for graph segmentation.

Edges must arrive pre-sorted ascending by (weight, a, b). Returns the
root representative of every vertex after the greedy merge pass and the
small-component cleanup pass.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef int _find(int[:] parent, int x) nogil:
    cdef int root = x
    while parent[root] != root:
        root = parent[root]
    # path compression
    cdef int nxt
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def segment_sorted_edges(int n,
                         cnp.ndarray[cnp.int32_t, ndim=1] ea,
                         cnp.ndarray[cnp.int32_t, ndim=1] eb,
                         cnp.ndarray[cnp.float64_t, ndim=1] weights,
                         double scale,
                         int min_size):
    cdef cnp.ndarray[cnp.int32_t, ndim=1] parent_arr = np.arange(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] size_arr = np.ones(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] thr_arr = np.full(n, scale, dtype=np.float64)
    cdef int[:] parent = parent_arr
    cdef int[:] size = size_arr
    cdef double[:] thr = thr_arr
    cdef Py_ssize_t m = ea.shape[0]
    cdef Py_ssize_t i
    cdef int ra, rb, keep, drop
    cdef double w

    for i in range(m):
        ra = _find(parent, ea[i])
        rb = _find(parent, eb[i])
        if ra == rb:
            continue
        w = weights[i]
        if w <= thr[ra] and w <= thr[rb]:
            # keep the smaller root id as representative for determinism
            if ra < rb:
                keep = ra; drop = rb
            else:
                keep = rb; drop = ra
            parent[drop] = keep
            size[keep] += size[drop]
            thr[keep] = w + scale / size[keep]

    if min_size > 1:
        for i in range(m):
            ra = _find(parent, ea[i])
            rb = _find(parent, eb[i])
            if ra == rb:
                continue
            if size[ra] < min_size or size[rb] < min_size:
                if ra < rb:
                    keep = ra; drop = rb
                else:
                    keep = rb; drop = ra
                parent[drop] = keep
                size[keep] += size[drop]

    cdef cnp.ndarray[cnp.int32_t, ndim=1] roots = np.empty(n, dtype=np.int32)
    for i in range(n):
        roots[i] = _find(parent, <int> i)
    return roots
