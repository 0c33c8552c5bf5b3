"""Piecewise-polynomial spectral graph filters for node classification.

The package splits into: sparse graph primitives (``graph``), dense and
Lanczos eigensolvers (``spectral``), spectrum partitioning and filter
banks (``filterbank``), the approximation verification lab (``approx``),
the differentiable model with manual gradients (``model``), training and
hyperparameter search (``train``), a scikit-learn style estimator facade
(``estimator``), dataset IO (``data``) and the ``specfilt`` command line
(``cli``).
"""

__version__ = "0.1.0"

from .estimator import PiecewiseSpectralClassifier
from .graph import (Dataset, Graph, NormalizedGraph, apply_power, build_graph,
                    edge_homophily, feature_variance_mean,
                    pairwise_distance_mean, sym_normalize, synth_csbm)
from .spectral import EigenSystem, dense_eigh, extreme_bands, lanczos_extreme, select_band
from .filterbank import (FilterBank, PartitionSpec, boundary_penalty,
                         eval_piece, freq_response, gpr_init, make_partitions)
from .train import TrainConfig, TrainResult, random_search, train_loop

__all__ = [
    "__version__",
    "PiecewiseSpectralClassifier",
    "Dataset", "Graph", "NormalizedGraph", "apply_power", "build_graph",
    "edge_homophily", "feature_variance_mean", "pairwise_distance_mean",
    "sym_normalize", "synth_csbm",
    "EigenSystem", "dense_eigh", "extreme_bands", "lanczos_extreme", "select_band",
    "FilterBank", "PartitionSpec", "boundary_penalty", "eval_piece",
    "freq_response", "gpr_init", "make_partitions",
    "TrainConfig", "TrainResult", "random_search", "train_loop",
]
