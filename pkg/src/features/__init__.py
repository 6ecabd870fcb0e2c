from .matrix import (
    FEATURE_NAMES,
    FeatureMatrix,
    Scaling,
    build_feature_matrix,
    clustering_input,
    feature_table,
    standardize,
    unstandardize,
)
from .stats import StatSeven, stat_seven
from .transitions import TransitionSummary, summarize_transitions, transition_features

__all__ = [
    "FEATURE_NAMES",
    "FeatureMatrix",
    "Scaling",
    "StatSeven",
    "TransitionSummary",
    "build_feature_matrix",
    "clustering_input",
    "feature_table",
    "stat_seven",
    "standardize",
    "summarize_transitions",
    "transition_features",
    "unstandardize",
]
