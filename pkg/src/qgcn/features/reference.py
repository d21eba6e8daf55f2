"""Pure-Python topology kernels.

Fallback implementations of the per-vertex traversal kernels; the compiled
extension in _fastpath.pyx mirrors these signatures exactly.  Both operate
on CSR adjacency (indptr/indices int64 arrays) so the caller builds the
graph view once.
"""

from __future__ import annotations

from collections import deque

import numpy as np

BACKEND = "python"


def betweenness_raw(indptr_out, indices_out, indptr_in, indices_in, n):
    """Brandes' exact betweenness, raw ordered-pair counts (no scaling).

    For undirected graphs pass the symmetric adjacency as both the out- and
    in-view; each unordered pair then contributes twice, matching the usual
    ordered-pair convention that the caller rescales.
    """
    score = np.zeros(n)
    dist = np.empty(n, dtype=np.int64)
    sigma = np.empty(n)
    delta = np.empty(n)
    for s in range(n):
        dist.fill(-1)
        sigma.fill(0.0)
        dist[s] = 0
        sigma[s] = 1.0
        order = []
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in indices_out[indptr_out[v]:indptr_out[v + 1]]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        delta.fill(0.0)
        # reverse BFS order; predecessors of w are in-neighbors one level up
        for w in reversed(order):
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in indices_in[indptr_in[w]:indptr_in[w + 1]]:
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] * coeff
            if w != s:
                score[w] += delta[w]
    return score


def bfs_stats(indptr_out, indices_out, n):
    """Per-vertex BFS distance statistics over reachable vertices.

    Returns an (n, 3) array of (mean distance, mean squared distance,
    reachable count), the source itself excluded; unreachable-everything
    rows are all zero.
    """
    stats = np.zeros((n, 3))
    dist = np.empty(n, dtype=np.int64)
    for s in range(n):
        dist.fill(-1)
        dist[s] = 0
        queue = deque([s])
        total = 0.0
        total_sq = 0.0
        count = 0
        while queue:
            v = queue.popleft()
            for w in indices_out[indptr_out[v]:indptr_out[v + 1]]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                    d = float(dist[w])
                    total += d
                    total_sq += d * d
                    count += 1
        if count:
            stats[s, 0] = total / count
            stats[s, 1] = total_sq / count
            stats[s, 2] = count
    return stats
