"""The quadratic-readout GCN.

Stacked graph-convolution layers X_k = act(A~ X_{k-1} W_k) feed a bilinear
readout V1^T F^T A~ X_K V2 whose output size is fixed by V1/V2 alone, so
graphs of any vertex count map to one score row per class.  The default
inner activation is the self-regularized SRSS, minimized at zero so the
layer separates zero from nonzero inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ConfigError, NumericFault, ShapeError
from .graphs import AdjacencyMode, NormalizedAdjacency, PaddedBatch, resolve_adjacency_mode
from .tensor import Tensor, concat_columns, softmax_rows


def srss(x, base=None):
    """Self-regularized activation G(x) - 2/(x^2 + 1).

    With the default G = 1 this is 1 - 2/(x^2 + 1): range (-1, 1], even,
    minimum -1 at x = 0, and equal to tanh(log|x|) away from zero.
    """
    x = np.asarray(x, dtype=np.float64)
    g = 1.0 if base is None else base(x)
    out = g - 2.0 / (x * x + 1.0)
    return out if out.ndim else float(out)


def _srss_value(x):
    return 1.0 - 2.0 / (x * x + 1.0)


def _srss_grad(x):
    denom = x * x + 1.0
    return 4.0 * x / (denom * denom)


def _sigmoid_value(x):
    return 1.0 / (1.0 + np.exp(-x))


def _sigmoid_grad(x):
    s = _sigmoid_value(x)
    return s * (1.0 - s)


# name -> (value fn, entrywise derivative fn)
ACTIVATIONS = {
    "srss": (_srss_value, _srss_grad),
    "relu": (lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(np.float64)),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
    "sigmoid": (_sigmoid_value, _sigmoid_grad),
    "identity": (lambda x: x, lambda x: np.ones_like(x)),
}

# the ablation grid; identity stays available to layer-level callers
MODEL_ACTIVATIONS = ("srss", "relu", "tanh", "sigmoid")


class FMode(Enum):
    X0 = "x0"          # readout left factor is the input matrix
    CONCAT = "concat"  # columns of every layer input, X_0 .. X_K
    LAST = "last"      # the final convolution output X_K (fully quadratic)


def resolve_f_mode(value) -> FMode:
    if isinstance(value, FMode):
        return value
    try:
        return FMode(str(value).lower())
    except ValueError:
        raise ConfigError(f"unknown f-mode {value!r}; expected x0, concat, or last") from None


def resolve_activation(name: str) -> str:
    key = str(name).lower()
    if key not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}")
    return key


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    n_classes: int
    layer_widths: tuple[int, ...] = (250, 250)
    f_mode: FMode = FMode.X0
    activation: str = "srss"
    adjacency: AdjacencyMode = AdjacencyMode.DEGREE_NORMALIZED
    dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        object.__setattr__(self, "f_mode", resolve_f_mode(self.f_mode))
        object.__setattr__(self, "activation", resolve_activation(self.activation))
        object.__setattr__(self, "adjacency", resolve_adjacency_mode(self.adjacency))
        if not self.layer_widths:
            raise ConfigError("layer_widths must be nonempty")
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    @property
    def n_outputs(self) -> int:
        """One sigmoid score for binary problems, one column per class otherwise."""
        return 1 if self.n_classes == 2 else self.n_classes

    @property
    def readout_width(self) -> int:
        """Column count of the selected readout left factor F."""
        if self.f_mode is FMode.X0:
            return self.input_dim
        if self.f_mode is FMode.CONCAT:
            return self.input_dim + sum(self.layer_widths)
        return self.layer_widths[-1]

    def with_overrides(self, **kw) -> "ModelConfig":
        return replace(self, **kw)


@dataclass(eq=False)
class ModelParams:
    """Layer weights W_k plus the readout pair (v1, v2); no bias terms."""

    gcn_weights: list[Tensor]
    v1: Tensor
    v2: Tensor

    def all(self) -> list[Tensor]:
        return [*self.gcn_weights, self.v1, self.v2]

    def names(self) -> list[str]:
        return [f"W{k + 1}" for k in range(len(self.gcn_weights))] + ["v1", "v2"]

    def zero_grad(self) -> None:
        for p in self.all():
            p.zero_grad()

    def copy(self) -> "ModelParams":
        return ModelParams(
            gcn_weights=[Tensor(w.data.copy(), requires_grad=True) for w in self.gcn_weights],
            v1=Tensor(self.v1.data.copy(), requires_grad=True),
            v2=Tensor(self.v2.data.copy(), requires_grad=True),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return dict(zip(self.names(), (p.data for p in self.all())))


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Glorot-uniform weights, deterministic per seed."""
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)

    dims = [config.input_dim, *config.layer_widths]
    weights = [glorot(dims[k], dims[k + 1]) for k in range(len(config.layer_widths))]
    v1 = glorot(config.readout_width, 1)
    v2 = glorot(config.layer_widths[-1], config.n_outputs)
    return ModelParams(gcn_weights=weights, v1=v1, v2=v2)


def _as_tensor(adj) -> Tensor:
    if isinstance(adj, Tensor):
        return adj
    if isinstance(adj, NormalizedAdjacency):
        return Tensor(adj.matrix)
    return Tensor(np.asarray(adj, dtype=np.float64))


def _check_finite(t: Tensor, where: str) -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NumericFault(f"non-finite values in {where}")
    return t


def gcn_layer(x, adj, w, activation: str = "srss") -> Tensor:
    """One convolution: activation(A~ @ X @ W)."""
    x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    adj = _as_tensor(adj)
    w = w if isinstance(w, Tensor) else Tensor(np.asarray(w, dtype=np.float64))
    fn, dfn = ACTIVATIONS[resolve_activation(activation)]
    return adj.matmul(x).matmul(w).elementwise(fn, dfn, name=activation)


def select_readout_input(mode, x0: Tensor, layer_outputs) -> Tensor:
    """Pick F for the readout: the input matrix, all layer inputs, or X_K."""
    mode = resolve_f_mode(mode)
    if mode is FMode.X0:
        return x0
    if mode is FMode.CONCAT:
        return concat_columns([x0, *layer_outputs])
    return layer_outputs[-1]


def quadratic_readout(f, adj, xk, v1, v2) -> Tensor:
    """Bilinear contraction v1^T F^T A~ X_K v2 -> one row of scores per graph.

    Accepts single (n, d) operands or stacks with one leading batch axis;
    the result is (batch, n_outputs) either way.
    """
    f = f if isinstance(f, Tensor) else Tensor(np.asarray(f, dtype=np.float64))
    adj = _as_tensor(adj)
    xk = xk if isinstance(xk, Tensor) else Tensor(np.asarray(xk, dtype=np.float64))
    v1 = v1 if isinstance(v1, Tensor) else Tensor(np.asarray(v1, dtype=np.float64))
    v2 = v2 if isinstance(v2, Tensor) else Tensor(np.asarray(v2, dtype=np.float64))
    single = f.data.ndim == 2
    if single:
        f = f.reshape(1, *f.shape)
        adj = adj.reshape(1, *adj.shape)
        xk = xk.reshape(1, *xk.shape)
    # contract cheap-first: (1,dF)@(B,dF,n) -> (B,1,n), then through A~ and X_K
    left = v1.transpose().matmul(f.transpose()).matmul(adj)
    logits = left.matmul(xk).matmul(v2)
    b = logits.shape[0]
    return logits.reshape(b, -1)


def forward_logits(
    batch: PaddedBatch,
    params: ModelParams,
    config: ModelConfig,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Raw readout scores, shape (batch, n_outputs)."""
    if batch.feature_stack.shape[-1] != config.input_dim:
        raise ShapeError(
            f"batch features have width {batch.feature_stack.shape[-1]}, model expects {config.input_dim}"
        )
    fn, dfn = ACTIVATIONS[config.activation]
    adj = Tensor(batch.adjacency_stack)
    x0 = Tensor(batch.feature_stack)
    x = x0
    layer_outputs = []
    for k, w in enumerate(params.gcn_weights):
        x = adj.matmul(x).matmul(w).elementwise(fn, dfn, name=f"{config.activation}[{k + 1}]")
        if train_mode and config.dropout > 0.0:
            if rng is None:
                rng = np.random.default_rng()
            keep = 1.0 - config.dropout
            mask = (rng.random(x.shape) < keep) / keep
            x = x.mul(Tensor(mask))
        _check_finite(x, f"convolution layer {k + 1}")
        layer_outputs.append(x)
    f = select_readout_input(config.f_mode, x0, layer_outputs)
    logits = quadratic_readout(f, adj, layer_outputs[-1], params.v1, params.v2)
    return _check_finite(logits, "quadratic readout")


def forward(
    batch: PaddedBatch,
    params: ModelParams,
    config: ModelConfig,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Class probabilities: sigmoid for binary, row softmax for multiclass."""
    logits = forward_logits(batch, params, config, train_mode=train_mode, rng=rng)
    if config.n_outputs == 1:
        return logits.sigmoid()
    return softmax_rows(logits)


def predict_labels(probs: np.ndarray, config: ModelConfig) -> np.ndarray:
    """Thresholded sigmoid at 0.5 for binary, row argmax otherwise."""
    if config.n_outputs == 1:
        return (probs.reshape(-1) > 0.5).astype(np.int64)
    return probs.argmax(axis=1).astype(np.int64)
