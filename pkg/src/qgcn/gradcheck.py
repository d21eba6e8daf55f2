"""Finite-difference verification of the analytic gradients.

Central differences with step 1e-6 against one backward pass, elementwise.
An entry passes when the relative error is <= 1e-4, or the absolute error
is <= 1e-7 where both gradients are below 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import AdjacencyMode, from_edge_list, normalize_adjacency, pad_batch
from .model import (
    MODEL_ACTIVATIONS,
    FMode,
    ModelConfig,
    ModelParams,
    forward,
    init_params,
)
from .tensor import Tensor, bce, cross_entropy

FD_STEP = 1e-6
REL_TOL = 1e-4
ABS_TOL = 1e-7
TINY_GRAD = 1e-6


@dataclass(frozen=True)
class GradReport:
    name: str
    worst_rel: float
    worst_abs: float
    n_checked: int
    passed: bool


@dataclass(frozen=True)
class ComboReport:
    """One gradient-contract verdict for a whole parameter set."""

    worst_rel: float
    worst_abs: float
    n_checked: int
    passed: bool
    failed_params: tuple[str, ...]


def summarize_reports(reports: list[GradReport]) -> ComboReport:
    return ComboReport(
        worst_rel=max(r.worst_rel for r in reports),
        worst_abs=max(r.worst_abs for r in reports),
        n_checked=sum(r.n_checked for r in reports),
        passed=all(r.passed for r in reports),
        failed_params=tuple(r.name for r in reports if not r.passed),
    )


def check_gradients(loss_fn, params: ModelParams, corrupt: str | None = None) -> list[GradReport]:
    """Compare backward-pass gradients of loss_fn() against central differences.

    loss_fn must rebuild the graph from the live parameter tensors on every
    call.  `corrupt` names a parameter whose analytic gradient is perturbed
    before comparison (a hook for testing the checker itself).
    """
    params.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: p.grad.copy() for name, p in zip(params.names(), params.all())}
    if corrupt is not None:
        analytic[corrupt] = analytic[corrupt] + 1.0

    reports = []
    for name, p in zip(params.names(), params.all()):
        a = analytic[name]
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + FD_STEP
            up = loss_fn().item()
            flat[i] = keep - FD_STEP
            down = loss_fn().item()
            flat[i] = keep
            num_flat[i] = (up - down) / (2.0 * FD_STEP)
        diff = np.abs(a - numeric)
        mag = np.maximum(np.abs(a), np.abs(numeric))
        tiny = mag < TINY_GRAD
        rel = np.where(tiny, 0.0, diff / np.where(mag == 0.0, 1.0, mag))
        ok = bool(np.all(rel <= REL_TOL) and np.all(diff[tiny] <= ABS_TOL))
        worst_abs = float(diff[tiny].max()) if tiny.any() else 0.0
        reports.append(GradReport(name=name, worst_rel=float(rel.max()),
                                  worst_abs=worst_abs, n_checked=flat.size, passed=ok))
    return reports


def random_batch(rng: np.random.Generator, n_classes: int, batch_size: int = 3,
                 max_vertices: int = 6, input_dim: int = 3,
                 adjacency: AdjacencyMode = AdjacencyMode.DEGREE_NORMALIZED,
                 feature_scale: float = 0.5):
    """A small random padded batch for model-level gradient checks."""
    items = []
    for _ in range(batch_size):
        n = int(rng.integers(2, max_vertices + 1))
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.6]
        if not edges:
            edges = [(0, 1)]
        g = from_edge_list(n, edges)
        adj = normalize_adjacency(g, adjacency)
        feats = rng.normal(scale=feature_scale, size=(n, input_dim))
        label = int(rng.integers(0, n_classes))
        items.append((adj, feats, label))
    return pad_batch(items)


# A finite-difference check is only meaningful where the loss is smooth at
# the base point: logits must stay out of sigmoid saturation (clamped
# probabilities flatten the landscape into kinks) and no relu input may sit
# within reach of its kink.  Candidate draws violating this are redrawn.
LOGIT_LIMIT = 4.0
KINK_CLEARANCE = 1e-3
MAX_DRAWS = 200


def _conditioning(batch, params, config) -> tuple[float, float]:
    """(max |logit|, min relu kink distance) at the base point, via plain numpy."""
    from .model import ACTIVATIONS, select_readout_input

    fn, _ = ACTIVATIONS[config.activation]
    adj = batch.adjacency_stack
    x = batch.feature_stack
    x0 = x
    outputs = []
    clearance = np.inf
    for w in params.gcn_weights:
        z = adj @ x @ w.data
        if config.activation == "relu":
            nonzero = np.abs(z[z != 0.0])
            if nonzero.size:
                clearance = min(clearance, float(nonzero.min()))
        x = fn(z)
        outputs.append(x)
    f = select_readout_input(config.f_mode, Tensor(x0), [Tensor(o) for o in outputs]).data
    logits = params.v1.data.T @ np.transpose(f, (0, 2, 1)) @ adj @ outputs[-1] @ params.v2.data
    return float(np.abs(logits).max()), clearance


def gradcheck_model(
    f_mode: FMode | str,
    activation: str,
    adjacency: AdjacencyMode | str,
    seed: int = 0,
    n_classes: int = 2,
    layer_widths: tuple[int, ...] = (5, 4),
    corrupt: str | None = None,
) -> list[GradReport]:
    """Gradient contract for one (f_mode, activation, adjacency) combination."""
    config = ModelConfig(
        input_dim=3, n_classes=n_classes, layer_widths=layer_widths,
        f_mode=f_mode, activation=activation, adjacency=adjacency,
    )
    rng = np.random.default_rng(seed)
    for _ in range(MAX_DRAWS):
        batch = random_batch(rng, n_classes, adjacency=config.adjacency)
        params = init_params(config, rng)
        max_logit, clearance = _conditioning(batch, params, config)
        if max_logit <= LOGIT_LIMIT and clearance >= KINK_CLEARANCE:
            break
    labels = np.asarray(batch.labels)

    def loss_fn() -> Tensor:
        probs = forward(batch, params, config)
        if config.n_outputs == 1:
            return bce(probs, labels.astype(np.float64))
        return cross_entropy(probs, labels)

    return check_gradients(loss_fn, params, corrupt=corrupt)


def all_combinations(n_classes: int = 2):
    """The full (f_mode, activation, adjacency) grid: 3 x 4 x 2 = 24 rows."""
    for f_mode in FMode:
        for activation in MODEL_ACTIVATIONS:
            for adjacency in AdjacencyMode:
                yield f_mode, activation, adjacency
