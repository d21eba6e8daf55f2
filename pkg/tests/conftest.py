"""Shared fixtures: random graph draws and synthetic TU-format trees."""

from __future__ import annotations

import os

import numpy as np
import pytest

from qgcn.graphs import Graph, from_edge_list


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4,
                 directed: bool = False, connected: bool = False) -> Graph:
    """Erdos-Renyi draw; `connected` chains the vertices first."""
    edges = []
    if connected:
        edges.extend((i, i + 1) for i in range(n - 1))
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            if not directed and u > v:
                continue
            if rng.random() < p:
                edges.append((u, v))
    if not edges and n >= 2:
        edges.append((0, 1))
    return from_edge_list(n, edges, directed=directed)


def write_tu_fixture(root, name: str, graphs: list[list[tuple[int, int]]],
                     sizes: list[int], labels: list[int],
                     node_labels: list[list[int]] | None = None,
                     node_attributes: list[list[list[float]]] | None = None) -> str:
    """Write a minimal TU-format dataset; returns the directory path.

    Edge lists are 0-based per graph; the writer applies the 1-based global
    numbering of the on-disk format.  Each undirected edge is emitted in both
    directions, as the real datasets do.
    """
    d = os.path.join(str(root), name)
    os.makedirs(d, exist_ok=True)
    offsets = np.cumsum([0] + sizes[:-1])
    with open(os.path.join(d, f"{name}_A.txt"), "w") as fh:
        for gi, edges in enumerate(graphs):
            for u, v in edges:
                a, b = offsets[gi] + u + 1, offsets[gi] + v + 1
                fh.write(f"{a}, {b}\n")
                fh.write(f"{b}, {a}\n")
    with open(os.path.join(d, f"{name}_graph_indicator.txt"), "w") as fh:
        for gi, size in enumerate(sizes):
            for _ in range(size):
                fh.write(f"{gi + 1}\n")
    with open(os.path.join(d, f"{name}_graph_labels.txt"), "w") as fh:
        for label in labels:
            fh.write(f"{label}\n")
    if node_labels is not None:
        with open(os.path.join(d, f"{name}_node_labels.txt"), "w") as fh:
            for per_graph in node_labels:
                for lab in per_graph:
                    fh.write(f"{lab}\n")
    if node_attributes is not None:
        with open(os.path.join(d, f"{name}_node_attributes.txt"), "w") as fh:
            for per_graph in node_attributes:
                for row in per_graph:
                    fh.write(", ".join(f"{x:.6f}" for x in row) + "\n")
    return d


@pytest.fixture
def tu_writer(tmp_path):
    def write(name, graphs, sizes, labels, **kw):
        return write_tu_fixture(tmp_path, name, graphs, sizes, labels, **kw)
    return write
