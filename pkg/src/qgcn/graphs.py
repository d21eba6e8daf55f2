"""Graph representation, adjacency normalization, and batch padding.

Graphs are stored as canonical edge lists and densified on demand.  The
propagation matrix is built from M = A + A^T + I, either degree-normalized
(D^-1/2 M D^-1/2 with D the diagonal of M's row sums) or used raw.  Both
variants are symmetric by construction, also for directed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, GraphError, ShapeError


class AdjacencyMode(Enum):
    DEGREE_NORMALIZED = "degree_normalized"
    RAW_SUM = "raw_sum"


# Hyperparameter tables elsewhere name the normalization "nr" / "nrs"; both
# labels resolve to the degree-normalized variant (normalization is always
# applied by default), kept as data so the convention is overridable.
ADJACENCY_ALIASES = {
    "degree_normalized": AdjacencyMode.DEGREE_NORMALIZED,
    "raw_sum": AdjacencyMode.RAW_SUM,
    "nr": AdjacencyMode.DEGREE_NORMALIZED,
    "nrs": AdjacencyMode.DEGREE_NORMALIZED,
}


def resolve_adjacency_mode(value: str | AdjacencyMode) -> AdjacencyMode:
    if isinstance(value, AdjacencyMode):
        return value
    try:
        return ADJACENCY_ALIASES[value.lower()]
    except KeyError:
        raise ConfigError(
            f"unknown adjacency mode {value!r}; expected one of {sorted(ADJACENCY_ALIASES)}"
        ) from None


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable graph with optional per-vertex attributes and a class label.

    Edges are canonical: no self-loops (self-interaction enters through the
    +I term of the propagation matrix), and undirected edges are stored once
    with source <= target.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    directed: bool = False
    vertex_attributes: np.ndarray | None = None
    label: int | None = None

    def neighbors_out(self) -> list[list[int]]:
        """Forward adjacency lists (both directions when undirected)."""
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v, _ in self.edges:
            out[u].append(v)
            if not self.directed:
                out[v].append(u)
        return out

    def neighbors_in(self) -> list[list[int]]:
        if not self.directed:
            return self.neighbors_out()
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for u, v, _ in self.edges:
            inc[v].append(u)
        return inc

    def dense_adjacency(self) -> np.ndarray:
        """Dense A with A[u, v] = w for each edge; symmetric if undirected."""
        a = np.zeros((self.n, self.n))
        for u, v, w in self.edges:
            a[u, v] = w
            if not self.directed:
                a[v, u] = w
        return a

    def relabeled(self, perm: np.ndarray) -> "Graph":
        """Graph with vertex i renamed perm[i]; attribute rows move along."""
        p = np.asarray(perm)
        edges = [(int(p[u]), int(p[v]), w) for u, v, w in self.edges]
        attrs = self.vertex_attributes
        if attrs is not None:
            moved = np.empty_like(attrs)
            moved[p] = attrs
            attrs = moved
        return from_edge_list(
            self.n, edges, directed=self.directed,
            vertex_attributes=attrs, label=self.label,
        )


def from_edge_list(
    n: int,
    edges,
    directed: bool = False,
    vertex_attributes: np.ndarray | None = None,
    label: int | None = None,
) -> Graph:
    """Validate and canonicalize an edge list into a Graph.

    Accepts (u, v) or (u, v, weight) items; weight defaults to 1.0.
    Duplicate edges are dropped (first occurrence wins).
    """
    if n < 1:
        raise GraphError(f"vertex count must be >= 1, got {n}")
    canonical: dict[tuple[int, int], float] = {}
    for item in edges:
        if len(item) == 2:
            u, v = item
            w = 1.0
        else:
            u, v, w = item
        u, v = int(u), int(v)
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"edge ({u}, {v}) has an endpoint outside [0, {n})")
        if u == v:
            raise GraphError(f"self-loop ({u}, {u}) rejected; self-interaction is added during normalization")
        if not directed and u > v:
            u, v = v, u
        canonical.setdefault((u, v), float(w))
    if vertex_attributes is not None:
        vertex_attributes = np.asarray(vertex_attributes, dtype=np.float64)
        if vertex_attributes.ndim != 2 or vertex_attributes.shape[0] != n:
            raise GraphError(
                f"vertex attributes must be an ({n}, a) matrix, got shape {vertex_attributes.shape}"
            )
    edge_tuple = tuple((u, v, w) for (u, v), w in sorted(canonical.items()))
    return Graph(n=n, edges=edge_tuple, directed=directed,
                 vertex_attributes=vertex_attributes, label=label)


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    matrix: np.ndarray
    mode: AdjacencyMode

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def normalize_adjacency(g: Graph, mode: AdjacencyMode) -> NormalizedAdjacency:
    """Build the propagation matrix from M = A + A^T + I.

    DEGREE_NORMALIZED divides entry (i, j) by sqrt(r_i * r_j) where r is the
    vector of row sums of M; those are >= 1, so no zero-division guard is
    needed.  RAW_SUM returns M itself.
    """
    mode = resolve_adjacency_mode(mode)
    a = g.dense_adjacency()
    m = a + a.T + np.eye(g.n)
    if mode is AdjacencyMode.RAW_SUM:
        return NormalizedAdjacency(matrix=m, mode=mode)
    r = m.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(r)
    normalized = m * inv_sqrt[:, None] * inv_sqrt[None, :]
    return NormalizedAdjacency(matrix=normalized, mode=mode)


@dataclass(frozen=True, eq=False)
class PaddedBatch:
    """Graphs stacked to a common vertex count by zero padding.

    Rows/columns beyond each graph's true size are exactly zero in both
    stacks, which leaves every A~-sandwiched product unchanged.
    """

    adjacency_stack: np.ndarray  # (B, n_max, n_max)
    feature_stack: np.ndarray    # (B, n_max, d)
    sizes: tuple[int, ...]
    labels: tuple[int, ...] = field(default=())

    @property
    def batch_size(self) -> int:
        return self.adjacency_stack.shape[0]

    @property
    def n_max(self) -> int:
        return self.adjacency_stack.shape[1]


def pad_batch(items) -> PaddedBatch:
    """Stack (NormalizedAdjacency, feature matrix, label) triples.

    Feature matrices may be FeatureMatrix objects or plain (n, d) arrays;
    all must share the column count d.
    """
    if not items:
        raise ShapeError("cannot pad an empty batch")
    adjs, feats, labels = [], [], []
    for adj, feat, label in items:
        values = getattr(feat, "values", feat)
        values = np.asarray(values, dtype=np.float64)
        if values.shape[0] != adj.n:
            raise ShapeError(
                f"feature matrix has {values.shape[0]} rows for a {adj.n}-vertex graph"
            )
        adjs.append(adj.matrix)
        feats.append(values)
        labels.append(label)
    d = feats[0].shape[1]
    for f in feats[1:]:
        if f.shape[1] != d:
            raise ShapeError(
                f"feature dimension mismatch in batch: {f.shape[1]} vs {d}"
            )
    sizes = tuple(a.shape[0] for a in adjs)
    n_max = max(sizes)
    b = len(items)
    adjacency_stack = np.zeros((b, n_max, n_max))
    feature_stack = np.zeros((b, n_max, d))
    for i, (a, f) in enumerate(zip(adjs, feats)):
        k = sizes[i]
        adjacency_stack[i, :k, :k] = a
        feature_stack[i, :k, :] = f
    return PaddedBatch(
        adjacency_stack=adjacency_stack,
        feature_stack=feature_stack,
        sizes=sizes,
        labels=tuple(labels),
    )
