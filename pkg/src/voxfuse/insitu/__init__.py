from .graphs import ObjectGraph, knn_edges, sample_null_graph, sample_object_graph
from .model import (
    AdamState,
    InSituModel,
    adam_step,
    forward,
    grad,
    init_insitu_model,
    load_checkpoint,
    save_checkpoint,
)
from .training import TrainConfig, TrainReport, classify_segment, fit_inventory, train

__all__ = [
    "ObjectGraph",
    "knn_edges",
    "sample_object_graph",
    "sample_null_graph",
    "InSituModel",
    "init_insitu_model",
    "forward",
    "grad",
    "AdamState",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
    "TrainConfig",
    "TrainReport",
    "train",
    "fit_inventory",
    "classify_segment",
]
