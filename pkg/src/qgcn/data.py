"""Dataset ingestion, the canonical on-disk formats, splits, and checkpoints.

Three file formats live here:
  * the public TU text layout (edge pairs + graph indicator + labels),
  * a canonical line-delimited JSON format, one graph per line,
  * a binary container (8-byte magic, JSON header, raw little-endian float64
    payloads) shared by checkpoints and cached matrix stacks.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ConfigError, DataError
from .features import Standardization, Standardizer
from .graphs import Graph, from_edge_list
from .model import ModelConfig, ModelParams
from .tensor import Tensor

CONTAINER_MAGIC = b"QGCNBIN1"
CONTAINER_VERSION = 1


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    graphs: tuple[Graph, ...]
    n_classes: int
    has_vertex_attributes: bool

    @property
    def size(self) -> int:
        return len(self.graphs)

    def labels(self) -> np.ndarray:
        return np.asarray([g.label for g in self.graphs], dtype=np.int64)

    def stats(self) -> dict:
        sizes = [g.n for g in self.graphs]
        edge_counts = [len(g.edges) for g in self.graphs]
        return {
            "name": self.name,
            "num_graphs": self.size,
            "avg_vertices": float(np.mean(sizes)),
            "avg_edges": float(np.mean(edge_counts)),
            "n_classes": self.n_classes,
        }

    def content_id(self) -> str:
        """Short content hash used to key feature caches."""
        h = hashlib.sha256()
        for g in self.graphs:
            h.update(f"{g.n}|{g.directed}|{g.label}|".encode())
            h.update(str(g.edges).encode())
            if g.vertex_attributes is not None:
                h.update(np.ascontiguousarray(g.vertex_attributes).tobytes())
        return f"{self.name}-{h.hexdigest()[:12]}"


def dataset_from_graphs(name: str, graphs) -> Dataset:
    """Validate labels form a contiguous 0-based range and package up."""
    graphs = tuple(graphs)
    if not graphs:
        raise DataError("dataset has no graphs")
    if any(g.label is None for g in graphs):
        raise DataError("every graph needs a class label")
    labels = sorted({g.label for g in graphs})
    n_classes = labels[-1] + 1
    if labels != list(range(n_classes)):
        raise DataError(f"labels must form a contiguous 0-based range, got {labels}")
    if n_classes < 2:
        raise DataError("a classification dataset needs at least 2 classes")
    return Dataset(
        name=name,
        graphs=graphs,
        n_classes=n_classes,
        has_vertex_attributes=all(g.vertex_attributes is not None for g in graphs),
    )


# ---- TU text format --------------------------------------------------------


def _tu_prefix(directory: str) -> str:
    candidates = [f[:-6] for f in os.listdir(directory) if f.endswith("_A.txt")]
    if not candidates:
        raise DataError(f"no *_A.txt edge file in {directory}")
    return sorted(candidates)[0]


def _read_int_lines(path: str) -> np.ndarray:
    with open(path) as fh:
        return np.asarray([int(line.strip()) for line in fh if line.strip()], dtype=np.int64)


def load_tu_dataset(path: str) -> Dataset:
    """Ingest a TU-collection dataset (1-based indices, comma-separated edges).

    `path` is the dataset directory or the file prefix inside it, so both
    "data/MUTAG" the folder and "data/MUTAG/MUTAG" work.  Node labels become
    one-hot vertex attributes; continuous node attributes are passed through
    unscaled and concatenated after the one-hot block.
    """
    if os.path.isdir(path):
        directory = path
        prefix = _tu_prefix(directory)
    else:
        directory = os.path.dirname(path) or "."
        prefix = os.path.basename(path)
        if not os.path.exists(os.path.join(directory, f"{prefix}_A.txt")):
            raise DataError(f"no {prefix}_A.txt edge file in {directory}")

    def fpath(suffix: str) -> str:
        return os.path.join(directory, f"{prefix}_{suffix}.txt")

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not os.path.exists(fpath(suffix)):
            raise DataError(f"missing mandatory file {prefix}_{suffix}.txt in {directory}")

    indicator = _read_int_lines(fpath("graph_indicator")) - 1
    if np.any(np.diff(indicator) < 0):
        raise DataError("graph_indicator must be sorted by graph")
    n_vertices = indicator.shape[0]
    n_graphs = int(indicator.max()) + 1
    counts = np.bincount(indicator, minlength=n_graphs)
    offsets = np.concatenate([[0], np.cumsum(counts)])

    raw_labels = _read_int_lines(fpath("graph_labels"))
    if raw_labels.shape[0] != n_graphs:
        raise DataError(
            f"{raw_labels.shape[0]} graph labels for {n_graphs} graphs"
        )
    alphabet = {v: i for i, v in enumerate(sorted(set(raw_labels.tolist())))}
    labels = [alphabet[v] for v in raw_labels.tolist()]

    edges_per_graph: list[set] = [set() for _ in range(n_graphs)]
    with open(fpath("A")) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                u_s, v_s = line.split(",")
                u, v = int(u_s) - 1, int(v_s) - 1
            except ValueError:
                raise DataError(f"{prefix}_A.txt line {lineno}: expected 'u, v'") from None
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise DataError(f"{prefix}_A.txt line {lineno}: vertex index out of range")
            gu, gv = indicator[u], indicator[v]
            if gu != gv:
                raise DataError(
                    f"{prefix}_A.txt line {lineno}: edge crosses graph boundary ({gu + 1} vs {gv + 1})"
                )
            lu, lv = int(u - offsets[gu]), int(v - offsets[gu])
            if lu == lv:
                continue  # self-interaction is supplied by normalization
            edges_per_graph[gu].add((min(lu, lv), max(lu, lv)))

    attributes: np.ndarray | None = None
    blocks = []
    node_label_path = fpath("node_labels")
    if os.path.exists(node_label_path):
        node_labels = _read_int_lines(node_label_path)
        if node_labels.shape[0] != n_vertices:
            raise DataError("node_labels length disagrees with graph_indicator")
        keys = sorted(set(node_labels.tolist()))
        lookup = {v: i for i, v in enumerate(keys)}
        onehot = np.zeros((n_vertices, len(keys)))
        for i, v in enumerate(node_labels.tolist()):
            onehot[i, lookup[v]] = 1.0
        blocks.append(onehot)
    attr_path = fpath("node_attributes")
    if os.path.exists(attr_path):
        with open(attr_path) as fh:
            rows = [
                [float(x) for x in line.replace(",", " ").split()]
                for line in fh if line.strip()
            ]
        cont = np.asarray(rows, dtype=np.float64)
        if cont.shape[0] != n_vertices:
            raise DataError("node_attributes length disagrees with graph_indicator")
        blocks.append(cont)
    if blocks:
        attributes = np.concatenate(blocks, axis=1)

    graphs = []
    for gid in range(n_graphs):
        lo, hi = int(offsets[gid]), int(offsets[gid + 1])
        attrs = attributes[lo:hi] if attributes is not None else None
        graphs.append(from_edge_list(
            hi - lo, sorted(edges_per_graph[gid]), directed=False,
            vertex_attributes=attrs, label=labels[gid],
        ))
    return dataset_from_graphs(prefix, graphs)


# ---- canonical line-delimited format ---------------------------------------


def save_canonical(dataset: Dataset, path: str) -> None:
    """One graph per line: {"n", "directed", "edges", "attrs", "label"}."""
    with open(path, "w") as fh:
        for g in dataset.graphs:
            edges = [[u, v] if w == 1.0 else [u, v, w] for u, v, w in g.edges]
            record = {
                "n": g.n,
                "directed": g.directed,
                "edges": edges,
                "attrs": None if g.vertex_attributes is None else g.vertex_attributes.tolist(),
                "label": g.label,
            }
            fh.write(json.dumps(record) + "\n")


def load_canonical(path: str) -> Dataset:
    graphs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path} line {lineno}: invalid JSON ({exc.msg})") from None
            try:
                n = int(record["n"])
                directed = bool(record["directed"])
                edges = record["edges"]
                attrs = record["attrs"]
                label = int(record["label"])
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path} line {lineno}: bad record ({exc})") from None
            attrs_arr = None if attrs is None else np.asarray(attrs, dtype=np.float64)
            try:
                graphs.append(from_edge_list(
                    n, edges, directed=directed, vertex_attributes=attrs_arr, label=label,
                ))
            except Exception as exc:
                raise DataError(f"{path} line {lineno}: {exc}") from None
    name = os.path.splitext(os.path.basename(path))[0]
    return dataset_from_graphs(name, graphs)


# ---- splits -----------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int
    ratios: tuple[float, float, float]

    def __post_init__(self):
        groups = (set(self.train), set(self.validation), set(self.test))
        total = len(self.train) + len(self.validation) + len(self.test)
        union = groups[0] | groups[1] | groups[2]
        if len(union) != total:
            raise ConfigError("split groups overlap")
        if union != set(range(total)):
            raise ConfigError("split groups must cover the dataset exactly")

    def hash(self) -> str:
        h = hashlib.sha256(repr((self.train, self.validation, self.test)).encode())
        return h.hexdigest()[:16]


def make_split(dataset_size: int, ratios, seed: int) -> Split:
    """Seeded shuffle, then contiguous slicing at the given ratios."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"need three positive ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset_size)
    n_train = int(round(ratios[0] * dataset_size))
    n_val = int(round(ratios[1] * dataset_size))
    n_test = dataset_size - n_train - n_val
    if n_train < 1:
        raise ConfigError(f"train split is empty for {dataset_size} graphs at ratios {ratios}")
    if n_val < 0 or n_test < 0:
        raise ConfigError(f"ratios {ratios} leave a negative split for {dataset_size} graphs")
    return Split(
        train=tuple(int(i) for i in perm[:n_train]),
        validation=tuple(int(i) for i in perm[n_train:n_train + n_val]),
        test=tuple(int(i) for i in perm[n_train + n_val:]),
        seed=seed,
        ratios=ratios,
    )


# ---- binary container (checkpoints, matrix stacks) --------------------------


def _write_container(path: str, kind: str, arrays, meta: dict) -> None:
    names, payloads = [], []
    for name, arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        names.append({"name": name, "shape": list(arr.shape)})
        payloads.append(arr.tobytes())
    header = json.dumps({
        "format_version": CONTAINER_VERSION,
        "kind": kind,
        "arrays": names,
        "meta": meta,
    }).encode()
    with open(path, "wb") as fh:
        fh.write(CONTAINER_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for p in payloads:
            fh.write(p)


def _read_container(path: str, kind: str, error_cls) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise error_cls(f"cannot read {path}: {exc}") from None
    if blob[:8] != CONTAINER_MAGIC:
        raise error_cls(f"{path} is not a {kind} file (bad magic)")
    try:
        (header_len,) = struct.unpack("<Q", blob[8:16])
        header = json.loads(blob[16:16 + header_len].decode())
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError):
        raise error_cls(f"{path} has a corrupted header") from None
    if header.get("format_version") != CONTAINER_VERSION:
        raise error_cls(
            f"{path} has format version {header.get('format_version')}, "
            f"this build reads version {CONTAINER_VERSION}"
        )
    if header.get("kind") != kind:
        raise error_cls(f"{path} holds a {header.get('kind')!r}, expected {kind!r}")
    arrays: dict[str, np.ndarray] = {}
    cursor = 16 + header_len
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
        raw = blob[cursor:cursor + nbytes]
        if len(raw) != nbytes:
            raise error_cls(f"{path} is truncated (array {spec['name']})")
        arrays[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        cursor += nbytes
    return arrays, header["meta"]


def save_matrix_stack(path: str, matrices, meta: dict) -> None:
    arrays = [(f"m{i:06d}", m) for i, m in enumerate(matrices)]
    _write_container(path, "matrix-stack", arrays, meta)


def load_matrix_stack(path: str) -> tuple[list[np.ndarray], dict]:
    arrays, meta = _read_container(path, "matrix-stack", DataError)
    return [arrays[k] for k in sorted(arrays)], meta


# ---- checkpoints -------------------------------------------------------------


def save_checkpoint(path: str, params: ModelParams, model_config: ModelConfig,
                    run_config: dict, standardizer: Standardizer | None = None,
                    extra_meta: dict | None = None) -> None:
    """Write parameters plus everything needed to rebuild the eval pipeline."""
    arrays = list(params.arrays().items())
    if standardizer is not None:
        arrays.append(("standardizer_shift", standardizer.shift))
        arrays.append(("standardizer_scale", standardizer.scale))
    meta = {
        "model": {
            "input_dim": model_config.input_dim,
            "n_classes": model_config.n_classes,
            "layer_widths": list(model_config.layer_widths),
            "f_mode": model_config.f_mode.value,
            "activation": model_config.activation,
            "adjacency": model_config.adjacency.value,
            "dropout": model_config.dropout,
        },
        "run_config": run_config,
        "standardizer_mode": None if standardizer is None else standardizer.mode.value,
        "n_gcn_layers": len(params.gcn_weights),
    }
    if extra_meta:
        meta["extra"] = extra_meta
    _write_container(path, "checkpoint", arrays, meta)


@dataclass(frozen=True, eq=False)
class CheckpointBundle:
    params: ModelParams
    model_config: ModelConfig
    run_config: dict
    standardizer: Standardizer | None
    meta: dict


def load_checkpoint(path: str) -> CheckpointBundle:
    arrays, meta = _read_container(path, "checkpoint", CheckpointError)
    mc = meta["model"]
    model_config = ModelConfig(
        input_dim=mc["input_dim"], n_classes=mc["n_classes"],
        layer_widths=tuple(mc["layer_widths"]), f_mode=mc["f_mode"],
        activation=mc["activation"], adjacency=mc["adjacency"],
        dropout=mc["dropout"],
    )
    n_layers = meta["n_gcn_layers"]
    try:
        weights = [Tensor(arrays[f"W{k + 1}"], requires_grad=True) for k in range(n_layers)]
        params = ModelParams(
            gcn_weights=weights,
            v1=Tensor(arrays["v1"], requires_grad=True),
            v2=Tensor(arrays["v2"], requires_grad=True),
        )
    except KeyError as exc:
        raise CheckpointError(f"{path} is missing parameter array {exc}") from None
    standardizer = None
    if meta.get("standardizer_mode"):
        standardizer = Standardizer(
            mode=Standardization(meta["standardizer_mode"]),
            shift=arrays["standardizer_shift"],
            scale=arrays["standardizer_scale"],
        )
    return CheckpointBundle(
        params=params, model_config=model_config,
        run_config=meta.get("run_config", {}),
        standardizer=standardizer, meta=meta,
    )


# ---- synthetic data -----------------------------------------------------------


def toy_triangles_vs_stars(n_per_class: int = 10) -> Dataset:
    """Tiny separable benchmark: triangle graphs vs 3-leaf stars."""
    graphs = []
    for _ in range(n_per_class):
        graphs.append(from_edge_list(3, [(0, 1), (1, 2), (0, 2)], label=0))
        graphs.append(from_edge_list(4, [(0, 1), (0, 2), (0, 3)], label=1))
    return dataset_from_graphs("toy-triangles-vs-stars", graphs)
