"""Loss assembly, Adam, and the repeat-and-select training protocol.

A run shuffles seeded mini-batches each epoch, validates after every epoch,
and retains the parameters of the best-validation-accuracy epoch (earliest
on ties).  The harness trains several repeats on one fixed split, reports
the test accuracy of the best-validation run, and never shows the test
split to train_once.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, Split, make_split
from .errors import AggregateFailure, ConfigError, LabelError, NumericFault
from .features import (
    Standardization,
    Standardizer,
    apply_standardizer,
    build_feature_matrix,
    cached_feature_matrices,
    fit_standardizer,
    parse_feature_set,
    resolve_standardization,
)
from .graphs import AdjacencyMode, PaddedBatch, normalize_adjacency, pad_batch, resolve_adjacency_mode
from .model import (
    FMode,
    ModelConfig,
    ModelParams,
    forward,
    init_params,
    predict_labels,
    resolve_activation,
    resolve_f_mode,
)
from .tensor import Tensor, bce, cross_entropy

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class RunConfig:
    """Everything a training run depends on, seeds included."""

    learning_rate: float = 1e-4
    batch_size: int = 128
    l2_coefficient: float = 0.0
    epochs: int = 300
    patience: int = 50
    repeats: int = 20
    split: tuple[float, float, float] = (0.675, 0.125, 0.2)
    seed: int = 0
    standardization: Standardization = Standardization.ZSCORE
    feature_set: frozenset = frozenset("bcd")
    use_external: bool = False
    adjacency: AdjacencyMode = AdjacencyMode.DEGREE_NORMALIZED
    f_mode: FMode = FMode.X0
    activation: str = "srss"
    layer_widths: tuple[int, ...] = (250, 250)
    dropout: float = 0.0
    centrality_kind: str = "betweenness"
    second_moment: str = "std"
    resplit_per_repeat: bool = False

    def __post_init__(self):
        object.__setattr__(self, "standardization", resolve_standardization(self.standardization))
        object.__setattr__(self, "feature_set", parse_feature_set(self.feature_set))
        object.__setattr__(self, "adjacency", resolve_adjacency_mode(self.adjacency))
        object.__setattr__(self, "f_mode", resolve_f_mode(self.f_mode))
        object.__setattr__(self, "activation", resolve_activation(self.activation))
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        object.__setattr__(self, "split", tuple(float(r) for r in self.split))
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.split}")
        if self.batch_size < 1 or self.repeats < 1 or self.epochs < 0 or self.patience < 1:
            raise ConfigError("batch_size/repeats must be >= 1, epochs >= 0, patience >= 1")

    def model_config(self, input_dim: int, n_classes: int) -> ModelConfig:
        return ModelConfig(
            input_dim=input_dim, n_classes=n_classes,
            layer_widths=self.layer_widths, f_mode=self.f_mode,
            activation=self.activation, adjacency=self.adjacency,
            dropout=self.dropout,
        )

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "l2_coefficient": self.l2_coefficient,
            "epochs": self.epochs,
            "patience": self.patience,
            "repeats": self.repeats,
            "split": list(self.split),
            "seed": self.seed,
            "standardization": self.standardization.value,
            "feature_set": "".join(sorted(self.feature_set)),
            "use_external": self.use_external,
            "adjacency": self.adjacency.value,
            "f_mode": self.f_mode.value,
            "activation": self.activation,
            "layer_widths": list(self.layer_widths),
            "dropout": self.dropout,
            "centrality_kind": self.centrality_kind,
            "second_moment": self.second_moment,
            "resplit_per_repeat": self.resplit_per_repeat,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown run-config keys: {sorted(unknown)}")
        kwargs = dict(raw)
        if "split" in kwargs:
            kwargs["split"] = tuple(kwargs["split"])
        if "layer_widths" in kwargs:
            kwargs["layer_widths"] = tuple(kwargs["layer_widths"])
        return cls(**kwargs)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class RunResult:
    seed: int
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1  # -1 means the initial parameters were retained
    best_val_accuracy: float = float("nan")
    params: ModelParams | None = None
    wall_clock: float = 0.0
    test_accuracy: float | None = None
    split_hash: str | None = None
    error: str | None = None


# ---- loss --------------------------------------------------------------------


def batch_loss(probs: Tensor, labels, params: ModelParams | None = None,
               l2: float = 0.0) -> Tensor:
    """Mean data loss plus l2 * sum of squared weights over all matrices."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise LabelError("empty batch")
    if probs.data.shape[-1] == 1:
        if np.any((labels < 0) | (labels > 1)):
            raise LabelError("binary labels must be 0 or 1")
        loss = bce(probs, labels.astype(np.float64))
    else:
        loss = cross_entropy(probs, labels)
    if l2 > 0.0:
        if params is None:
            raise ConfigError("l2 > 0 requires the parameters")
        penalty = params.all()[0].sum_squares()
        for p in params.all()[1:]:
            penalty = penalty.add(p.sum_squares())
        loss = loss.add(penalty.scale(l2))
    return loss


# ---- Adam ----------------------------------------------------------------------


@dataclass
class AdamState:
    t: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def for_params(cls, params: list[Tensor]) -> "AdamState":
        return cls(t=0,
                   m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params])


def adam_step(params: list[Tensor], grads, state: AdamState, lr: float) -> AdamState:
    """One bias-corrected Adam update, in place on the parameter tensors."""
    state.t += 1
    t = state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.zeros_like(p.data) if g is None else g
        if not np.all(np.isfinite(g)):
            raise NumericFault(f"non-finite gradient in parameter {i}")
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state.m[i] / (1.0 - ADAM_BETA1 ** t)
        v_hat = state.v[i] / (1.0 - ADAM_BETA2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return state


# ---- item assembly --------------------------------------------------------------


def prepare_features(dataset: Dataset, config: RunConfig, cache_dir=None):
    """Adjacency and raw (unstandardized) feature matrices for every graph."""
    adjs = [normalize_adjacency(g, config.adjacency) for g in dataset.graphs]
    if cache_dir is not None:
        feats = cached_feature_matrices(
            dataset.graphs, config.feature_set, config.use_external,
            cache_dir, dataset.content_id(),
            centrality_kind=config.centrality_kind, second_moment=config.second_moment,
        )
    else:
        feats = [
            build_feature_matrix(g, config.feature_set, use_external=config.use_external,
                                 centrality_kind=config.centrality_kind,
                                 second_moment=config.second_moment)
            for g in dataset.graphs
        ]
    return adjs, feats


def assemble_items(adjs, feats, labels, split: Split, config: RunConfig):
    """Standardize on the training split only, then group items per split."""
    standardizer = fit_standardizer([feats[i] for i in split.train], config.standardization)
    transformed = [apply_standardizer(standardizer, f) for f in feats]

    def group(indices):
        return [(adjs[i], transformed[i], int(labels[i])) for i in indices]

    return (group(split.train), group(split.validation), group(split.test), standardizer)


# ---- evaluation -------------------------------------------------------------------


def _eval_chunks(items, chunk_size: int = 256):
    for lo in range(0, len(items), chunk_size):
        yield items[lo:lo + chunk_size]


def eval_loss_accuracy(params: ModelParams, config: ModelConfig, items,
                       l2: float = 0.0) -> tuple[float, float]:
    """Mean data loss and accuracy over a split, batched for padding economy."""
    if not items:
        raise ConfigError("cannot evaluate an empty split")
    total_loss = 0.0
    correct = 0
    for chunk in _eval_chunks(items):
        batch = pad_batch(chunk)
        probs = forward(batch, params, config, train_mode=False)
        labels = np.asarray(batch.labels)
        total_loss += batch_loss(probs, labels).item() * len(chunk)
        correct += int((predict_labels(probs.data, config) == labels).sum())
    n = len(items)
    loss = total_loss / n
    if l2 > 0.0:
        loss += l2 * sum(float(np.sum(p.data ** 2)) for p in params.all())
    return loss, correct / n


def evaluate(params: ModelParams, config: ModelConfig, items) -> float:
    """Fraction of graphs whose predicted class matches the label."""
    _, accuracy = eval_loss_accuracy(params, config, items)
    return accuracy


# ---- single run ---------------------------------------------------------------------


def train_once(config: RunConfig, model_config: ModelConfig,
               train_items, val_items, seed: int) -> RunResult:
    """Train on one split; the test split never enters here."""
    if not train_items:
        raise ConfigError("training split is empty")
    t0 = time.perf_counter()
    init_seed, shuffle_seed = np.random.SeedSequence(seed).spawn(2)
    params = init_params(model_config, init_seed)
    rng = np.random.default_rng(shuffle_seed)
    state = AdamState.for_params(params.all())

    result = RunResult(seed=seed)
    best_val = -1.0
    best_params = params.copy()
    epochs_since_best = 0

    if config.epochs == 0:
        val_loss, val_acc = eval_loss_accuracy(params, model_config, val_items)
        result.best_val_accuracy = val_acc
        result.params = params
        result.wall_clock = time.perf_counter() - t0
        return result

    n_train = len(train_items)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        loss_sum = 0.0
        correct = 0
        for lo in range(0, n_train, config.batch_size):
            chunk = [train_items[i] for i in order[lo:lo + config.batch_size]]
            batch = pad_batch(chunk)
            labels = np.asarray(batch.labels)
            probs = forward(batch, params, model_config, train_mode=True, rng=rng)
            loss = batch_loss(probs, labels, params, config.l2_coefficient)
            params.zero_grad()
            loss.backward()
            adam_step(params.all(), [p.grad for p in params.all()], state,
                      config.learning_rate)
            data_loss = bce(Tensor(probs.data), labels.astype(np.float64)).item() \
                if model_config.n_outputs == 1 else \
                cross_entropy(Tensor(probs.data), labels).item()
            loss_sum += data_loss * len(chunk)
            correct += int((predict_labels(probs.data, model_config) == labels).sum())
        val_loss, val_acc = eval_loss_accuracy(params, model_config, val_items)
        result.epochs.append(EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n_train,
            train_accuracy=correct / n_train,
            val_loss=val_loss,
            val_accuracy=val_acc,
        ))
        if val_acc > best_val:
            best_val = val_acc
            best_params = params.copy()
            result.best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if epochs_since_best >= config.patience:
            break

    result.best_val_accuracy = best_val
    result.params = best_params
    result.wall_clock = time.perf_counter() - t0
    return result


# ---- repeat harness -------------------------------------------------------------------


@dataclass
class RepeatOutcome:
    best: RunResult
    runs: list[RunResult]
    test_mean: float
    test_stderr: float
    model_config: ModelConfig
    standardizer: Standardizer | None
    split: Split | None  # the shared split; None when resplitting per repeat

    @property
    def split_hash(self) -> str | None:
        return self.split.hash() if self.split is not None else None


def repeat_seeds(master_seed: int, repeats: int) -> list[int]:
    """Deterministic, recordable per-repeat seeds derived from the master."""
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(repeats)]


def repeat_and_select(config: RunConfig, dataset: Dataset, cache_dir=None,
                      progress=None) -> RepeatOutcome:
    """Train `repeats` times, pick the best-validation run, report its test accuracy.

    The split is fixed across repeats by default; each repeat reshuffles its
    own mini-batches and draws its own initialization.  A failed run (numeric
    fault) is recorded and skipped in aggregation.
    """
    adjs, feats = prepare_features(dataset, config, cache_dir)
    labels = dataset.labels()
    seeds = repeat_seeds(config.seed, config.repeats)
    model_config = config.model_config(feats[0].d, dataset.n_classes)

    shared_split = None
    if not config.resplit_per_repeat:
        shared_split = make_split(dataset.size, config.split, config.seed)
        train_items, val_items, test_items, standardizer = assemble_items(
            adjs, feats, labels, shared_split, config)

    runs: list[RunResult] = []
    for r, seed in enumerate(seeds):
        if config.resplit_per_repeat:
            split = make_split(dataset.size, config.split, seed)
            train_items, val_items, test_items, standardizer = assemble_items(
                adjs, feats, labels, split, config)
        else:
            split = shared_split
        try:
            run = train_once(config, model_config, train_items, val_items, seed)
            run.test_accuracy = evaluate(run.params, model_config, test_items)
        except NumericFault as exc:
            run = RunResult(seed=seed, error=str(exc))
        run.split_hash = split.hash()
        runs.append(run)
        if progress is not None:
            progress(r, run)

    ok = [r for r in runs if r.error is None]
    if not ok:
        raise AggregateFailure(f"all {config.repeats} repeats failed; first error: {runs[0].error}")
    best = max(ok, key=lambda r: r.best_val_accuracy)
    accs = np.asarray([r.test_accuracy for r in ok])
    stderr = float(accs.std(ddof=1) / np.sqrt(len(ok))) if len(ok) > 1 else 0.0
    return RepeatOutcome(
        best=best, runs=runs,
        test_mean=float(accs.mean()), test_stderr=stderr,
        model_config=model_config, standardizer=standardizer,
        split=shared_split,
    )
