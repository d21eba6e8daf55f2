# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled topology kernels; drop-in replacements for reference.py."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def betweenness_raw(cnp.int64_t[::1] indptr_out, cnp.int64_t[::1] indices_out,
                    cnp.int64_t[::1] indptr_in, cnp.int64_t[::1] indices_in,
                    Py_ssize_t n):
    """Brandes' exact betweenness, raw ordered-pair counts (no scaling)."""
    score_arr = np.zeros(n)
    dist_arr = np.empty(n, dtype=np.int64)
    sigma_arr = np.empty(n)
    delta_arr = np.empty(n)
    order_arr = np.empty(n, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int64)

    cdef double[::1] score = score_arr
    cdef cnp.int64_t[::1] dist = dist_arr
    cdef double[::1] sigma = sigma_arr
    cdef double[::1] delta = delta_arr
    cdef cnp.int64_t[::1] order = order_arr
    cdef cnp.int64_t[::1] queue = queue_arr

    cdef Py_ssize_t s, v, w, i, head, tail, n_order, k
    cdef double coeff

    for s in range(n):
        for i in range(n):
            dist[i] = -1
            sigma[i] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        n_order = 0
        while head < tail:
            v = queue[head]
            head += 1
            order[n_order] = v
            n_order += 1
            for i in range(indptr_out[v], indptr_out[v + 1]):
                w = indices_out[i]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        for i in range(n):
            delta[i] = 0.0
        for k in range(n_order - 1, -1, -1):
            w = order[k]
            coeff = (1.0 + delta[w]) / sigma[w]
            for i in range(indptr_in[w], indptr_in[w + 1]):
                v = indices_in[i]
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] * coeff
            if w != s:
                score[w] += delta[w]
    return score_arr


def bfs_stats(cnp.int64_t[::1] indptr_out, cnp.int64_t[::1] indices_out,
              Py_ssize_t n):
    """Per-vertex (mean, mean square, count) of BFS distances to reachable vertices."""
    stats_arr = np.zeros((n, 3))
    dist_arr = np.empty(n, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int64)

    cdef double[:, ::1] stats = stats_arr
    cdef cnp.int64_t[::1] dist = dist_arr
    cdef cnp.int64_t[::1] queue = queue_arr

    cdef Py_ssize_t s, v, w, i, head, tail, count
    cdef double total, total_sq, d

    for s in range(n):
        for i in range(n):
            dist[i] = -1
        dist[s] = 0
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        total = 0.0
        total_sq = 0.0
        count = 0
        while head < tail:
            v = queue[head]
            head += 1
            for i in range(indptr_out[v], indptr_out[v + 1]):
                w = indices_out[i]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
                    d = <double> dist[w]
                    total += d
                    total_sq += d * d
                    count += 1
        if count > 0:
            stats[s, 0] = total / count
            stats[s, 1] = total_sq / count
            stats[s, 2] = count
    return stats_arr
