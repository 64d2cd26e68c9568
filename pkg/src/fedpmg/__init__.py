"""Federated pseudo-modality generation for incomplete multi-modal MRI reconstruction."""
from .clustering import CentroidSet, ClusterConfig, kmeans
from .config import ClientConfig, ExperimentConfig, default_config
from .errors import (AggregationError, ConfigError, FedPMGError, FormatError, InvalidInput,
                     MissingModalityError, ShapeError)
from .federation import RunMode, run_experiment
from .pmg import BlendParams, generate_pseudo

__version__ = "0.1.0"

__all__ = [
    "AggregationError", "BlendParams", "CentroidSet", "ClientConfig", "ClusterConfig", "ConfigError",
    "ExperimentConfig", "FedPMGError", "FormatError", "InvalidInput", "MissingModalityError", "RunMode",
    "ShapeError", "default_config", "generate_pseudo", "kmeans", "run_experiment",
]
