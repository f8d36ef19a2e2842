"""Counterfactual explanations for time-series anomalies.

An anomalous window ``A`` is explained as "would be like <normal window>, except
for <corruption>": eight inverse-corruption operators are tried against the
training data and the one that closes the largest share of the distance wins.
"""
from .config import Config, ConfigError, load_config
from .corrupt import CorruptionSpec, GroundTruth, corrupt, corrupt_series
from .detect import AnomalyCandidate, MatrixProfile, find_anomalies, left_matrix_profile, train_threshold
from .explain import Explanation, NotAnomalousError, explain
from .metrics import dtw, euclidean, nn_search, oed, pnd, znorm_euclidean
from .operators import OPERATORS, OcclusionSubkind, OperatorKind, OperatorResult, References, run_suite
from .series import DegenerateInputError, TimeSeries, znormalize

__version__ = "0.1.0"

__all__ = [
    "AnomalyCandidate",
    "Config",
    "ConfigError",
    "CorruptionSpec",
    "DegenerateInputError",
    "Explanation",
    "GroundTruth",
    "MatrixProfile",
    "NotAnomalousError",
    "OPERATORS",
    "OcclusionSubkind",
    "OperatorKind",
    "OperatorResult",
    "References",
    "TimeSeries",
    "corrupt",
    "corrupt_series",
    "dtw",
    "euclidean",
    "explain",
    "find_anomalies",
    "left_matrix_profile",
    "load_config",
    "nn_search",
    "oed",
    "pnd",
    "run_suite",
    "train_threshold",
    "znorm_euclidean",
    "znormalize",
]
