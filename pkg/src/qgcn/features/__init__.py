"""Per-vertex topological input features and their standardization.

The traversal kernels (betweenness, BFS statistics) exist twice: a compiled
Cython extension and a pure-Python reference.  The compiled backend is
selected at import when available; set QGCN_PURE_PYTHON=1 to force the
fallback.  benchmarks/bench_features.py compares the two.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ConfigError
from ..graphs import Graph
from . import reference as _py_impl

try:
    from . import _fastpath as _fast_impl
except ImportError:
    _fast_impl = None

if _fast_impl is not None and not os.environ.get("QGCN_PURE_PYTHON"):
    _impl = _fast_impl
else:
    _impl = _py_impl

# bump when feature definitions change; part of the on-disk cache key
FEATURE_VERSION = 1

FEATURE_CODES = {
    "b": "b", "bfs": "b",
    "c": "c", "centrality": "c",
    "d": "d", "degree": "d",
}


def backend() -> str:
    """Name of the active kernel backend ('compiled' or 'python')."""
    return _impl.BACKEND


def available_backends() -> dict:
    out = {"python": _py_impl}
    if _fast_impl is not None:
        out["compiled"] = _fast_impl
    return out


def parse_feature_set(spec) -> frozenset[str]:
    """Normalize 'b,c,d' / 'bcd' / iterable of codes into a frozenset of {b, c, d}."""
    if isinstance(spec, str):
        spec = [s for s in spec.replace(",", " ").split() if s]
        if len(spec) == 1 and len(spec[0]) > 1 and all(ch in FEATURE_CODES for ch in spec[0].lower()):
            spec = list(spec[0])
    codes = set()
    for item in spec:
        key = str(item).strip().lower()
        if key == "external":
            continue
        if key not in FEATURE_CODES:
            raise ConfigError(f"unknown feature code {item!r}; expected b, c, d")
        codes.add(FEATURE_CODES[key])
    return frozenset(codes)


class Standardization(Enum):
    ZSCORE = "zscore"
    MINMAX = "minmax"


def resolve_standardization(value) -> Standardization:
    if isinstance(value, Standardization):
        return value
    key = str(value).lower().replace("-", "").replace("_", "")
    if key in ("zscore", "z"):
        return Standardization.ZSCORE
    if key in ("minmax", "mm"):
        return Standardization.MINMAX
    raise ConfigError(f"unknown standardization {value!r}; expected zscore or minmax")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray  # (n, d) float64
    column_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _csr(neighbor_lists) -> tuple[np.ndarray, np.ndarray]:
    indptr = np.zeros(len(neighbor_lists) + 1, dtype=np.int64)
    for i, nbrs in enumerate(neighbor_lists):
        indptr[i + 1] = indptr[i] + len(nbrs)
    indices = np.empty(indptr[-1], dtype=np.int64)
    pos = 0
    for nbrs in neighbor_lists:
        indices[pos:pos + len(nbrs)] = nbrs
        pos += len(nbrs)
    return indptr, indices


def degree_features(g: Graph) -> FeatureMatrix:
    """One 'degree' column, or (in_degree, out_degree) for directed graphs."""
    if g.directed:
        values = np.zeros((g.n, 2))
        for u, v, _ in g.edges:
            values[v, 0] += 1.0
            values[u, 1] += 1.0
        return FeatureMatrix(values, ("in_degree", "out_degree"))
    values = np.zeros((g.n, 1))
    for u, v, _ in g.edges:
        values[u, 0] += 1.0
        values[v, 0] += 1.0
    return FeatureMatrix(values, ("degree",))


def centrality(g: Graph, kind: str = "betweenness") -> FeatureMatrix:
    """Exact centrality column; 'betweenness' (default) or 'closeness'.

    Betweenness follows the ordered-pair convention rescaled by
    1/((n-1)(n-2)), which for undirected graphs counts each unordered pair
    once against the halved pair budget.  Disconnected graphs sum over
    reachable pairs only.
    """
    if kind == "betweenness":
        out_ptr, out_idx = _csr(g.neighbors_out())
        if g.directed:
            in_ptr, in_idx = _csr(g.neighbors_in())
        else:
            in_ptr, in_idx = out_ptr, out_idx
        raw = np.asarray(_impl.betweenness_raw(out_ptr, out_idx, in_ptr, in_idx, g.n))
        scale = 1.0 / ((g.n - 1) * (g.n - 2)) if g.n > 2 else 0.0
        return FeatureMatrix((raw * scale)[:, None], ("betweenness",))
    if kind == "closeness":
        out_ptr, out_idx = _csr(g.neighbors_out())
        stats = np.asarray(_impl.bfs_stats(out_ptr, out_idx, g.n))
        mean, count = stats[:, 0], stats[:, 2]
        values = np.zeros(g.n)
        reach = count > 0
        # count/(mean*count) with the reachable-fraction correction
        if g.n > 1:
            values[reach] = (1.0 / mean[reach]) * (count[reach] / (g.n - 1))
        return FeatureMatrix(values[:, None], ("closeness",))
    raise ConfigError(f"unknown centrality kind {kind!r}")


def bfs_moments(g: Graph, second_moment: str = "std") -> FeatureMatrix:
    """Mean and spread of BFS distances from each vertex to reachable ones.

    The second column is the standard deviation by default, or the raw
    second moment E[d^2] when second_moment='raw'.  Vertices reaching
    nothing get (0, 0).
    """
    if second_moment not in ("std", "raw"):
        raise ConfigError(f"unknown second-moment kind {second_moment!r}")
    out_ptr, out_idx = _csr(g.neighbors_out())
    stats = np.asarray(_impl.bfs_stats(out_ptr, out_idx, g.n))
    mean, m2 = stats[:, 0], stats[:, 1]
    if second_moment == "raw":
        second = m2
    else:
        second = np.sqrt(np.maximum(m2 - mean * mean, 0.0))
    values = np.stack([mean, second], axis=1)
    return FeatureMatrix(values, ("bfs_mean", f"bfs_{second_moment}"))


def build_feature_matrix(
    g: Graph,
    feature_set,
    use_external: bool = False,
    centrality_kind: str = "betweenness",
    second_moment: str = "std",
) -> FeatureMatrix:
    """Concatenate enabled features in fixed order: degree, centrality, BFS, external."""
    codes = parse_feature_set(feature_set)
    if not codes and not use_external:
        raise ConfigError("empty feature set and no external attributes requested")
    blocks: list[FeatureMatrix] = []
    if "d" in codes:
        blocks.append(degree_features(g))
    if "c" in codes:
        blocks.append(centrality(g, kind=centrality_kind))
    if "b" in codes:
        blocks.append(bfs_moments(g, second_moment=second_moment))
    if use_external:
        if g.vertex_attributes is None:
            raise ConfigError("external attributes requested but the graph has none")
        a = g.vertex_attributes.shape[1]
        blocks.append(FeatureMatrix(
            g.vertex_attributes.astype(np.float64, copy=True),
            tuple(f"attr_{i}" for i in range(a)),
        ))
    values = np.concatenate([b.values for b in blocks], axis=1)
    names = tuple(name for b in blocks for name in b.column_names)
    return FeatureMatrix(values, names)


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-column affine transform fitted on training graphs only."""

    mode: Standardization
    shift: np.ndarray  # column mean (zscore) or min (minmax)
    scale: np.ndarray  # column std or range, degenerate columns pinned to 1


def fit_standardizer(train, mode) -> Standardizer:
    """Fit column statistics over the stacked rows of all training matrices."""
    mode = resolve_standardization(mode)
    if not train:
        raise ConfigError("cannot fit a standardizer on an empty training list")
    rows = np.concatenate([getattr(m, "values", m) for m in train], axis=0)
    if mode is Standardization.ZSCORE:
        shift = rows.mean(axis=0)
        scale = rows.std(axis=0)
    else:
        shift = rows.min(axis=0)
        scale = rows.max(axis=0) - shift
    # constant columns transform to exactly 0
    scale = np.where(scale < 1e-12, 1.0, scale)
    return Standardizer(mode=mode, shift=shift, scale=scale)


def apply_standardizer(s: Standardizer, m):
    """Elementwise affine transform; returns the same kind it was given."""
    values = getattr(m, "values", m)
    transformed = (values - s.shift) / s.scale
    if isinstance(m, FeatureMatrix):
        return FeatureMatrix(transformed, m.column_names)
    return transformed


def cache_key(dataset_id: str, feature_set, use_external: bool,
              centrality_kind: str = "betweenness", second_moment: str = "std") -> str:
    codes = "".join(sorted(parse_feature_set(feature_set)))
    if use_external:
        codes += "x"
    return f"{dataset_id}__{codes}__{centrality_kind}-{second_moment}__v{FEATURE_VERSION}"


def cached_feature_matrices(
    graphs,
    feature_set,
    use_external: bool,
    cache_dir,
    dataset_id: str,
    centrality_kind: str = "betweenness",
    second_moment: str = "std",
) -> list[FeatureMatrix]:
    """Featurize every graph once per (dataset, feature set, version)."""
    from ..data import load_matrix_stack, save_matrix_stack

    key = cache_key(dataset_id, feature_set, use_external, centrality_kind, second_moment)
    path = os.path.join(str(cache_dir), key + ".qmx")
    if os.path.exists(path):
        arrays, meta = load_matrix_stack(path)
        names = tuple(meta["column_names"])
        return [FeatureMatrix(a, names) for a in arrays]
    mats = [
        build_feature_matrix(g, feature_set, use_external=use_external,
                             centrality_kind=centrality_kind, second_moment=second_moment)
        for g in graphs
    ]
    os.makedirs(str(cache_dir), exist_ok=True)
    save_matrix_stack(path, [m.values for m in mats],
                      meta={"column_names": list(mats[0].column_names), "key": key})
    return mats
