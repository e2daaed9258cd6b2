"""Edge-filter vs bent-pipe satellite image pipeline simulator.

A from-scratch CNN engine (four binary classifiers including the grouped
+ shuffled + recombined MobileShuffleNet variant), a calibrated affine
downlink model, and a deterministic comparison harness for the two
transmission strategies.
"""

from .config import ExperimentConfig, parse_config, render_config
from .datasets import (
    BinarizationMap,
    LabeledImage,
    default_binarization,
    generate_synthetic,
    load_directory,
    resize_bilinear,
)
from .estimator import CnnClassifier
from .layers import channel_shuffle
from .link import LinkParams, TransmitRecord, calibrate, transmit
from .models import (
    BUILDERS,
    MacReport,
    Model,
    build_model,
    load_model,
    mac_count,
    save_model,
)
from .pipeline import (
    DEFAULT_MAC_RATE,
    ComparisonTable,
    RunReport,
    compare,
    run_bent_pipe,
    run_edge_filter,
)
from .report import render_csv, render_table
from .tensor import Normal, Rng, Tensor, Uniform, tensor_create, tensor_random, tensor_zip
from .training import (
    Adam,
    Metrics,
    TrainConfig,
    compute_metrics,
    evaluate,
    softmax_cross_entropy,
    split_dataset,
    train_model,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "BUILDERS",
    "BinarizationMap",
    "CnnClassifier",
    "ComparisonTable",
    "DEFAULT_MAC_RATE",
    "ExperimentConfig",
    "LabeledImage",
    "LinkParams",
    "MacReport",
    "Metrics",
    "Model",
    "Normal",
    "Rng",
    "RunReport",
    "Tensor",
    "TrainConfig",
    "TransmitRecord",
    "Uniform",
    "build_model",
    "calibrate",
    "channel_shuffle",
    "compare",
    "compute_metrics",
    "default_binarization",
    "evaluate",
    "generate_synthetic",
    "load_directory",
    "load_model",
    "mac_count",
    "parse_config",
    "render_config",
    "render_csv",
    "render_table",
    "resize_bilinear",
    "run_bent_pipe",
    "run_edge_filter",
    "save_model",
    "softmax_cross_entropy",
    "split_dataset",
    "tensor_create",
    "tensor_random",
    "tensor_zip",
    "train_model",
    "transmit",
]
