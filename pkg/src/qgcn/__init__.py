"""Graph classification with GCN layers and a quadratic readout.

The model stacks graph-convolution layers over a symmetrized adjacency and
collapses the vertex dimension with a bilinear form, so every graph maps to
a fixed-size output regardless of its vertex count.  Inputs are cheap
topological features (degree, centrality, BFS distance moments), optionally
joined by external vertex attributes.
"""

__version__ = "0.1.0"

from .errors import (
    AggregateFailure,
    CheckpointError,
    ConfigError,
    DataError,
    GraphError,
    LabelError,
    NumericFault,
    QgcnError,
    ShapeError,
)
from .graphs import (
    AdjacencyMode,
    Graph,
    NormalizedAdjacency,
    PaddedBatch,
    from_edge_list,
    normalize_adjacency,
    pad_batch,
)
from .features import (
    FeatureMatrix,
    Standardization,
    Standardizer,
    apply_standardizer,
    backend,
    bfs_moments,
    build_feature_matrix,
    centrality,
    degree_features,
    fit_standardizer,
    parse_feature_set,
)
from .tensor import Tensor
from .model import (
    ACTIVATIONS,
    MODEL_ACTIVATIONS,
    FMode,
    ModelConfig,
    ModelParams,
    forward,
    forward_logits,
    init_params,
    predict_labels,
    srss,
)
from .data import (
    Dataset,
    Split,
    dataset_from_graphs,
    load_canonical,
    load_checkpoint,
    load_tu_dataset,
    make_split,
    save_canonical,
    save_checkpoint,
    toy_triangles_vs_stars,
)
from .training import (
    AdamState,
    RunConfig,
    RunResult,
    adam_step,
    batch_loss,
    evaluate,
    repeat_and_select,
    train_once,
)
from .gradcheck import all_combinations, check_gradients, gradcheck_model

__all__ = [
    "ACTIVATIONS",
    "AdamState",
    "AdjacencyMode",
    "AggregateFailure",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Dataset",
    "FMode",
    "FeatureMatrix",
    "Graph",
    "GraphError",
    "LabelError",
    "MODEL_ACTIVATIONS",
    "ModelConfig",
    "ModelParams",
    "NormalizedAdjacency",
    "NumericFault",
    "PaddedBatch",
    "QgcnError",
    "RunConfig",
    "RunResult",
    "ShapeError",
    "Split",
    "Standardization",
    "Standardizer",
    "Tensor",
    "adam_step",
    "all_combinations",
    "apply_standardizer",
    "backend",
    "batch_loss",
    "bfs_moments",
    "build_feature_matrix",
    "centrality",
    "check_gradients",
    "dataset_from_graphs",
    "degree_features",
    "evaluate",
    "fit_standardizer",
    "forward",
    "forward_logits",
    "from_edge_list",
    "gradcheck_model",
    "init_params",
    "load_canonical",
    "load_checkpoint",
    "load_tu_dataset",
    "make_split",
    "normalize_adjacency",
    "pad_batch",
    "parse_feature_set",
    "predict_labels",
    "repeat_and_select",
    "save_canonical",
    "save_checkpoint",
    "srss",
    "toy_triangles_vs_stars",
    "train_once",
    "__version__",
]
