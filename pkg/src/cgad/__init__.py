"""Causal-graph anomaly detection for multivariate time series.

Pipeline: estimate a weighted directed causal graph from pairwise transfer
entropy, train a graph-plus-temporal convolutional single-step forecaster on
anomaly-free data, then flag timestamps whose MAD-normalized forecast errors
exceed an extreme-value threshold.
"""

__version__ = "0.1.0"

from .causal import CausalGraph, TEConfig, generate_graph, transfer_entropy
from .evaluation import EvalReport, evaluate
from .forecaster import ForecastModel, ModelConfig, TrainConfig, build_model, train
from .scoring import PotConfig, ScoreSeries, score_and_detect
from .series import MultivariateSeries, fit_minmax, apply_minmax, load_csv, make_windows
from .synth import SyntheticSpec, generate

__all__ = [
    "CausalGraph",
    "EvalReport",
    "ForecastModel",
    "ModelConfig",
    "MultivariateSeries",
    "PotConfig",
    "ScoreSeries",
    "SyntheticSpec",
    "TEConfig",
    "TrainConfig",
    "apply_minmax",
    "build_model",
    "evaluate",
    "fit_minmax",
    "generate",
    "generate_graph",
    "load_csv",
    "make_windows",
    "score_and_detect",
    "train",
    "transfer_entropy",
]
