"""pd4ml: unified physics benchmark datasets, graph-building recipes, and the
two shared baseline networks (FCN and GraphNet) on a small numpy autodiff
engine.

Typical use:

    from pd4ml import hub, models, training

    hub.synth_write("grid20-like", 1000, seed=0, out_path="./data")
    train = hub.load_data("SynthGrid20", "train", "./data", graph=True)
    ...

See the demos/ directory for narrative walkthroughs of each capability.
"""

from .engine import GradTape, Tensor, backward
from .errors import (ContractError, DatasetLookupError, DimensionError,
                     DomainError, FetchError, FormatError, IntegrityError,
                     MalformedRecordError, NumericError, Pd4mlError,
                     TrainingDiverged)
from .graphs import (Adjacency, NormalizedAdjacency, decay_tree_adjacency,
                     grid_adjacency, knn_adjacency, normalize, write_edge_list)
from .hub import LoadedData, load, load_data, synth_write
from .models import (build_fcn, build_graphnet, fcn_param_count,
                     graphnet_param_count, load_checkpoint, predict,
                     save_checkpoint)
from .registry import (REGISTRY, DatasetDescriptor, SplitData, describe,
                       print_description, registry_lookup)
from .synth import SYNTH_KINDS, synth_generate
from .training import (RunMetrics, TrainConfig, accuracy, adam_step,
                       aggregate_runs, auc, bce, evaluate_model, fit,
                       fcn_preset, graphnet_preset, mse, resolution, train_run)

__version__ = "0.1.0"

__all__ = [
    "GradTape", "Tensor", "backward",
    "Pd4mlError", "DimensionError", "DomainError", "ContractError",
    "NumericError", "MalformedRecordError", "DatasetLookupError",
    "IntegrityError", "FetchError", "FormatError", "TrainingDiverged",
    "Adjacency", "NormalizedAdjacency", "knn_adjacency", "grid_adjacency",
    "decay_tree_adjacency", "normalize", "write_edge_list",
    "LoadedData", "load", "load_data", "synth_write",
    "build_fcn", "build_graphnet", "fcn_param_count", "graphnet_param_count",
    "predict", "save_checkpoint", "load_checkpoint",
    "REGISTRY", "DatasetDescriptor", "SplitData", "describe",
    "print_description", "registry_lookup",
    "SYNTH_KINDS", "synth_generate",
    "RunMetrics", "TrainConfig", "accuracy", "adam_step", "aggregate_runs",
    "auc", "bce", "evaluate_model", "fit", "fcn_preset", "graphnet_preset",
    "mse", "resolution", "train_run",
]
