"""Topological feature kernels against brute-force oracles.

The oracles enumerate shortest paths explicitly (DFS over simple paths,
Floyd-Warshall distances), sharing no code with the production kernels.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from conftest import random_graph
from qgcn.errors import ConfigError
from qgcn.features import (
    FeatureMatrix,
    Standardization,
    apply_standardizer,
    available_backends,
    backend,
    bfs_moments,
    build_feature_matrix,
    centrality,
    degree_features,
    fit_standardizer,
    parse_feature_set,
)
from qgcn.graphs import from_edge_list

# ---- oracles -------------------------------------------------------------------


def _adjacency_sets(g):
    out = [set() for _ in range(g.n)]
    for u, v, _ in g.edges:
        out[u].add(v)
        if not g.directed:
            out[v].add(u)
    return out


def floyd_warshall(g) -> np.ndarray:
    """All-pairs 0/1-weight distances; inf where unreachable."""
    dist = np.full((g.n, g.n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for u, v, _ in g.edges:
        dist[u, v] = 1.0
        if not g.directed:
            dist[v, u] = 1.0
    for k in range(g.n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def count_paths(g, s: int, t: int, length: int) -> tuple[int, dict]:
    """Number of simple paths s->t of exactly `length` edges, and per-vertex
    counts of those paths passing through each interior vertex."""
    adj = _adjacency_sets(g)
    total = 0
    through = dict.fromkeys(range(g.n), 0)

    def walk(node, steps, visited):
        nonlocal total
        if steps == length:
            if node == t:
                total += 1
                for w in visited:
                    if w not in (s, t):
                        through[w] += 1
            return
        for nxt in adj[node]:
            if nxt not in visited:
                walk(nxt, steps + 1, visited | {nxt})

    walk(s, 0, {s})
    return total, through


def betweenness_oracle(g) -> np.ndarray:
    """Ordered-pair shortest-path counting by explicit path enumeration."""
    dist = floyd_warshall(g)
    raw = np.zeros(g.n)
    for s, t in itertools.permutations(range(g.n), 2):
        if not np.isfinite(dist[s, t]):
            continue
        sigma, through = count_paths(g, s, t, int(dist[s, t]))
        if sigma == 0:
            continue
        for v in range(g.n):
            if v != s and v != t:
                raw[v] += through[v] / sigma
    if g.n > 2:
        raw /= (g.n - 1) * (g.n - 2)
    else:
        raw[:] = 0.0
    return raw


def bfs_oracle(g, second_moment: str = "std") -> np.ndarray:
    """Distance moments from Floyd-Warshall distances."""
    dist = floyd_warshall(g)
    out = np.zeros((g.n, 2))
    for v in range(g.n):
        reach = [dist[v, u] for u in range(g.n) if u != v and np.isfinite(dist[v, u])]
        if not reach:
            continue
        d = np.asarray(reach)
        mean = d.mean()
        second = (d ** 2).mean()
        out[v, 0] = mean
        out[v, 1] = np.sqrt(max(second - mean ** 2, 0.0)) if second_moment == "std" else second
    return out


# ---- hand-worked cases ------------------------------------------------------------


def test_betweenness_path3():
    g = from_edge_list(3, [(0, 1), (1, 2)])
    got = centrality(g, "betweenness").values.reshape(-1)
    assert np.allclose(got, [0.0, 1.0, 0.0])


def test_betweenness_star_center():
    g = from_edge_list(4, [(0, 1), (0, 2), (0, 3)])
    got = centrality(g, "betweenness").values.reshape(-1)
    assert np.allclose(got, [1.0, 0.0, 0.0, 0.0])


def test_betweenness_two_vertices_zero():
    g = from_edge_list(2, [(0, 1)])
    got = centrality(g, "betweenness").values.reshape(-1)
    assert np.allclose(got, [0.0, 0.0])


def test_bfs_moments_path3():
    g = from_edge_list(3, [(0, 1), (1, 2)])
    got = bfs_moments(g).values
    # endpoint distances {1, 2}: mean 1.5, std 0.5; center {1, 1}: mean 1, std 0
    assert np.allclose(got, [[1.5, 0.5], [1.0, 0.0], [1.5, 0.5]])


def test_bfs_moments_isolated_vertex():
    g = from_edge_list(3, [(0, 1)])
    got = bfs_moments(g).values
    assert np.allclose(got[2], [0.0, 0.0])


def test_degree_undirected_single_column():
    g = from_edge_list(3, [(0, 1), (1, 2)])
    m = degree_features(g)
    assert m.values.shape == (3, 1)
    assert np.allclose(m.values.reshape(-1), [1.0, 2.0, 1.0])


def test_degree_directed_two_columns():
    g = from_edge_list(3, [(0, 1), (1, 2), (2, 0)], directed=True)
    m = degree_features(g)
    assert m.values.shape == (3, 2)
    assert np.allclose(m.values[:, 0], [1.0, 1.0, 1.0])  # out
    assert np.allclose(m.values[:, 1], [1.0, 1.0, 1.0])  # in


# ---- oracle sweeps across both backends ----------------------------------------------


def _kernel_centrality(impl, g) -> np.ndarray:
    """Run one backend's raw betweenness kernel on a graph."""
    from qgcn.features import _csr

    out_ptr, out_idx = _csr(g.neighbors_out())
    if g.directed:
        in_ptr, in_idx = _csr(g.neighbors_in())
    else:
        in_ptr, in_idx = out_ptr, out_idx
    raw = np.asarray(impl.betweenness_raw(out_ptr, out_idx, in_ptr, in_idx, g.n))
    if g.n > 2:
        raw = raw / ((g.n - 1) * (g.n - 2))
    else:
        raw = np.zeros(g.n)
    return raw


def _kernel_bfs(impl, g) -> np.ndarray:
    from qgcn.features import _csr

    indptr_out, indices_out = _csr(g.neighbors_out())
    stats = np.asarray(impl.bfs_stats(indptr_out, indices_out, g.n))
    out = np.zeros((g.n, 2))
    for v in range(g.n):
        mean, second, count = stats[v]
        if count > 0:
            out[v, 0] = mean
            out[v, 1] = np.sqrt(max(second - mean ** 2, 0.0))
    return out


@pytest.mark.parametrize("backend_name", sorted(available_backends()))
def test_betweenness_matches_oracle(backend_name):
    impl = available_backends()[backend_name]
    rng = np.random.default_rng(20240811)
    for trial in range(100):
        n = int(rng.integers(2, 9))
        directed = bool(rng.random() < 0.3)
        g = random_graph(rng, n, p=float(rng.uniform(0.2, 0.8)),
                         directed=directed, connected=bool(rng.random() < 0.7))
        want = betweenness_oracle(g)
        got = _kernel_centrality(impl, g)
        assert np.max(np.abs(got - want)) <= 1e-9, (trial, n, directed, g.edges)


@pytest.mark.parametrize("backend_name", sorted(available_backends()))
def test_bfs_moments_match_oracle(backend_name):
    impl = available_backends()[backend_name]
    rng = np.random.default_rng(907)
    for trial in range(100):
        n = int(rng.integers(2, 9))
        directed = bool(rng.random() < 0.3)
        g = random_graph(rng, n, p=float(rng.uniform(0.15, 0.8)),
                         directed=directed, connected=bool(rng.random() < 0.5))
        want = bfs_oracle(g)
        got = _kernel_bfs(impl, g)
        assert np.max(np.abs(got - want)) <= 1e-9, (trial, n, directed, g.edges)


def test_backends_agree_exactly():
    impls = available_backends()
    if len(impls) < 2:
        pytest.skip("compiled backend unavailable")
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(2, 12))
        g = random_graph(rng, n, p=0.4, directed=bool(rng.random() < 0.5))
        results = [_kernel_centrality(impl, g) for impl in impls.values()]
        assert np.array_equal(results[0], results[1])
        stats = [_kernel_bfs(impl, g) for impl in impls.values()]
        assert np.array_equal(stats[0], stats[1])


def test_raw_second_moment_option():
    g = from_edge_list(3, [(0, 1), (1, 2)])
    got = bfs_moments(g, second_moment="raw").values
    # endpoint distances {1, 2}: E[d^2] = 2.5
    assert np.allclose(got, [[1.5, 2.5], [1.0, 1.0], [1.5, 2.5]])


def test_closeness_variant():
    g = from_edge_list(3, [(0, 1), (1, 2)])
    got = centrality(g, "closeness").values.reshape(-1)
    # closeness = (n-1) / sum of distances
    assert np.allclose(got, [2 / 3, 1.0, 2 / 3])


# ---- assembly and standardization -----------------------------------------------------


def test_feature_matrix_column_order():
    g = from_edge_list(3, [(0, 1), (1, 2)])
    m = build_feature_matrix(g, parse_feature_set("b,c,d"))
    assert m.values.shape == (3, 4)
    assert list(m.column_names) == ["degree", "betweenness", "bfs_mean", "bfs_std"]
    assert np.allclose(m.values[:, 0], [1, 2, 1])
    assert np.allclose(m.values[:, 1], [0, 1, 0])
    assert np.allclose(m.values[:, 2], [1.5, 1.0, 1.5])


def test_feature_subset_width():
    g = from_edge_list(3, [(0, 1), (1, 2)])
    m = build_feature_matrix(g, parse_feature_set("c,d"))
    assert m.values.shape == (3, 2)
    assert list(m.column_names) == ["degree", "betweenness"]


def test_external_features_appended():
    attrs = np.array([[10.0, 20.0], [30.0, 40.0]])
    g = from_edge_list(2, [(0, 1)], vertex_attributes=attrs)
    m = build_feature_matrix(g, parse_feature_set("d"), use_external=True)
    assert m.values.shape == (2, 3)
    assert np.allclose(m.values[:, 1:], attrs)


def test_external_without_attributes_rejected():
    g = from_edge_list(2, [(0, 1)])
    with pytest.raises(ConfigError):
        build_feature_matrix(g, parse_feature_set("d"), use_external=True)


def test_empty_feature_selection_rejected():
    g = from_edge_list(2, [(0, 1)])
    with pytest.raises(ConfigError):
        build_feature_matrix(g, frozenset())


def test_parse_feature_set_forms():
    assert parse_feature_set("b,c,d") == frozenset("bcd")
    assert parse_feature_set("bcd") == frozenset("bcd")
    assert parse_feature_set(["degree", "bfs"]) == frozenset("bd")
    with pytest.raises(ConfigError):
        parse_feature_set("b,q")


def test_zscore_standardizer():
    rng = np.random.default_rng(11)
    train = [FeatureMatrix(rng.normal(3.0, 2.0, size=(8, 3)), ("a", "b", "c"))
             for _ in range(20)]
    s = fit_standardizer(train, Standardization.ZSCORE)
    rows = np.concatenate([apply_standardizer(s, m).values for m in train], axis=0)
    assert np.allclose(rows.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(rows.std(axis=0), 1.0, atol=1e-12)


def test_minmax_standardizer():
    rng = np.random.default_rng(12)
    train = [FeatureMatrix(rng.uniform(-5, 9, size=(6, 2)), ("a", "b")) for _ in range(10)]
    s = fit_standardizer(train, Standardization.MINMAX)
    rows = np.concatenate([apply_standardizer(s, m).values for m in train], axis=0)
    assert rows.min() >= -1e-12 and rows.max() <= 1 + 1e-12
    assert np.isclose(rows.min(axis=0), 0.0).all()
    assert np.isclose(rows.max(axis=0), 1.0).all()


def test_constant_column_maps_to_zero():
    train = [FeatureMatrix(np.full((4, 2), 7.0), ("a", "b")) for _ in range(3)]
    for mode in Standardization:
        s = fit_standardizer(train, mode)
        out = apply_standardizer(s, train[0]).values
        assert np.allclose(out, 0.0)


def test_standardizer_is_train_only():
    train = [FeatureMatrix(np.zeros((2, 1)), ("a",))]
    other = FeatureMatrix(np.array([[5.0], [9.0]]), ("a",))
    s = fit_standardizer(train, Standardization.ZSCORE)
    out = apply_standardizer(s, other).values
    # shift/scale come from the constant training column: scale pinned to 1
    assert np.allclose(out, [[5.0], [9.0]])


def test_backend_reports_a_known_name():
    assert backend() in ("compiled", "python")
