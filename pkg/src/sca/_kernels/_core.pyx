# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see _fallback.py for the contract)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

IS_COMPILED = True


def prim_mst(points, core):
    points = np.ascontiguousarray(points, dtype=np.float64)
    core = np.ascontiguousarray(core, dtype=np.float64)
    cdef double[:, ::1] P = points
    cdef double[::1] C = core
    cdef Py_ssize_t n = P.shape[0]
    cdef Py_ssize_t d = P.shape[1]

    heads_arr = np.empty(n - 1, dtype=np.int64)
    tails_arr = np.empty(n - 1, dtype=np.int64)
    weights_arr = np.empty(n - 1, dtype=np.float64)
    in_tree_arr = np.zeros(n, dtype=np.uint8)
    best_arr = np.full(n, np.inf)
    parent_arr = np.full(n, -1, dtype=np.int64)

    cdef long long[::1] heads = heads_arr
    cdef long long[::1] tails = tails_arr
    cdef double[::1] weights = weights_arr
    cdef unsigned char[::1] in_tree = in_tree_arr
    cdef double[::1] best = best_arr
    cdef long long[::1] parent = parent_arr

    cdef Py_ssize_t current = 0, step, j, k, nxt
    cdef double dist, diff, mreach, cur_core, frontier_best

    in_tree[0] = 1
    for step in range(n - 1):
        cur_core = C[current]
        for j in range(n):
            if in_tree[j]:
                continue
            dist = 0.0
            for k in range(d):
                diff = P[j, k] - P[current, k]
                dist += diff * diff
            dist = sqrt(dist)
            mreach = dist
            if C[j] > mreach:
                mreach = C[j]
            if cur_core > mreach:
                mreach = cur_core
            if mreach < best[j]:
                best[j] = mreach
                parent[j] = current
        nxt = -1
        frontier_best = np.inf
        for j in range(n):
            if not in_tree[j] and best[j] < frontier_best:
                frontier_best = best[j]
                nxt = j
        heads[step] = parent[nxt]
        tails[step] = nxt
        weights[step] = best[nxt]
        in_tree[nxt] = 1
        current = nxt
    return heads_arr, tails_arr, weights_arr


def union_find_linkage(us, vs, ws, Py_ssize_t n):
    us = np.ascontiguousarray(us, dtype=np.int64)
    vs = np.ascontiguousarray(vs, dtype=np.int64)
    ws = np.ascontiguousarray(ws, dtype=np.float64)
    cdef long long[::1] U = us
    cdef long long[::1] V = vs
    cdef double[::1] W = ws

    parent_arr = np.arange(2 * n - 1, dtype=np.int64)
    size_arr = np.ones(2 * n - 1, dtype=np.int64)
    out_arr = np.empty((n - 1, 4), dtype=np.float64)
    cdef long long[::1] parent = parent_arr
    cdef long long[::1] size = size_arr
    cdef double[:, ::1] out = out_arr

    cdef Py_ssize_t step
    cdef long long ra, rb, new, lo, hi, x, root, tmp

    for step in range(n - 1):
        x = U[step]
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            tmp = parent[x]
            parent[x] = root
            x = tmp
        ra = root

        x = V[step]
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            tmp = parent[x]
            parent[x] = root
            x = tmp
        rb = root

        new = n + step
        parent[ra] = new
        parent[rb] = new
        size[new] = size[ra] + size[rb]
        if ra < rb:
            lo = ra
            hi = rb
        else:
            lo = rb
            hi = ra
        out[step, 0] = lo
        out[step, 1] = hi
        out[step, 2] = W[step]
        out[step, 3] = size[new]
    return out_arr


def layout_epoch(pos, heads, tails, applied, negatives,
                 double lr, double repulsion, double clip):
    cdef double[:, ::1] Y = pos
    cdef long long[::1] H = np.ascontiguousarray(heads, dtype=np.int64)
    cdef long long[::1] T = np.ascontiguousarray(tails, dtype=np.int64)
    cdef long long[::1] A = np.ascontiguousarray(applied, dtype=np.int64)
    negatives = np.ascontiguousarray(negatives, dtype=np.int64)
    cdef long long[:, ::1] N = negatives

    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t d = Y.shape[1]
    cdef Py_ssize_t rate = N.shape[1]
    delta_arr = np.zeros_like(pos)
    cdef double[:, ::1] delta = delta_arr

    cdef Py_ssize_t e, k, col
    cdef long long i, j
    cdef double d2, diff, coeff, g

    # attractive pull on edge heads
    for e in range(m):
        i = H[A[e]]
        j = T[A[e]]
        d2 = 0.0
        for k in range(d):
            diff = Y[i, k] - Y[j, k]
            d2 += diff * diff
        coeff = -2.0 / (1.0 + d2)
        for k in range(d):
            g = coeff * (Y[i, k] - Y[j, k])
            if g > clip:
                g = clip
            elif g < -clip:
                g = -clip
            delta[i, k] += g * lr
    # matching push on edge tails
    for e in range(m):
        i = H[A[e]]
        j = T[A[e]]
        d2 = 0.0
        for k in range(d):
            diff = Y[i, k] - Y[j, k]
            d2 += diff * diff
        coeff = -2.0 / (1.0 + d2)
        for k in range(d):
            g = coeff * (Y[i, k] - Y[j, k])
            if g > clip:
                g = clip
            elif g < -clip:
                g = -clip
            delta[j, k] -= g * lr
    # repulsion from sampled non-neighbors
    for col in range(rate):
        for e in range(m):
            i = H[A[e]]
            j = N[e, col]
            d2 = 0.0
            for k in range(d):
                diff = Y[i, k] - Y[j, k]
                d2 += diff * diff
            coeff = 2.0 * repulsion / ((0.001 + d2) * (1.0 + d2))
            for k in range(d):
                g = coeff * (Y[i, k] - Y[j, k])
                if g > clip:
                    g = clip
                elif g < -clip:
                    g = -clip
                delta[i, k] += g * lr
    pos += delta_arr
