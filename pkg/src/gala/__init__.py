"""GALA: graph convolutional autoencoder with Laplacian smoothing and sharpening."""

from .config import Config, derive_seed
from .constants import *
from .data_io import Dataset, TrainingData, load_dataset, load_edge_list, sbm_generate
from .exceptions import (
    ConfigError,
    DataFormatError,
    GalaError,
    GraphError,
    NumericalError,
    ShapeError,
    TrainingDiverged,
)
from .graph_ops import Graph, PropagationOperator, build_operator, knn_graph, spectral_radius
from .models import ArchitectureSection, LayerSpec, RunConfig, SbmSpec, SubspaceConfig, TrainConfig
from .trainer import finetune, pretrain, train_linkpred

__all__ = [
    "Config",
    "derive_seed",
    "Dataset",
    "TrainingData",
    "load_dataset",
    "load_edge_list",
    "sbm_generate",
    "ConfigError",
    "DataFormatError",
    "GalaError",
    "GraphError",
    "NumericalError",
    "ShapeError",
    "TrainingDiverged",
    "Graph",
    "PropagationOperator",
    "build_operator",
    "knn_graph",
    "spectral_radius",
    "ArchitectureSection",
    "LayerSpec",
    "RunConfig",
    "SbmSpec",
    "SubspaceConfig",
    "TrainConfig",
    "finetune",
    "pretrain",
    "train_linkpred",
]
