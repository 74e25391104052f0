"""Nearest-neighbour toolkit: metrics, indexes, voting, selection, CLI."""

__version__ = "0.1.0"

from .core import (
    Dataset,
    FeatureSchema,
    FoldPlan,
    Normalizer,
    fit_normalizer,
    load_csv,
    load_schema,
    stratified_folds,
)
from .index import BallTree, BruteForceIndex, KdTree, NeighbourList, RpForest, ann_query, knn_query
from .learner import EvalReport, Prediction, VotingScheme, classify, evaluate_cv, regress
from .metrics import (
    Histogram,
    MetricConfig,
    SimilarityScore,
    chebyshev,
    chi_square,
    cosine_similarity,
    heterogeneous,
    jeffrey_divergence,
    kl_divergence,
    minkowski,
    ncd,
    pearson,
    spearman,
    to_distance,
)
from .xmetrics import DtwDistance, FlowMatrix, Signature, WarpPath, dtw, emd

__all__ = [
    "__version__",
    "BallTree",
    "BruteForceIndex",
    "Dataset",
    "DtwDistance",
    "EvalReport",
    "FeatureSchema",
    "FlowMatrix",
    "FoldPlan",
    "Histogram",
    "KdTree",
    "MetricConfig",
    "NeighbourList",
    "Normalizer",
    "Prediction",
    "RpForest",
    "Signature",
    "SimilarityScore",
    "VotingScheme",
    "WarpPath",
    "ann_query",
    "chebyshev",
    "chi_square",
    "classify",
    "cosine_similarity",
    "dtw",
    "emd",
    "evaluate_cv",
    "fit_normalizer",
    "heterogeneous",
    "jeffrey_divergence",
    "kl_divergence",
    "knn_query",
    "load_csv",
    "load_schema",
    "minkowski",
    "ncd",
    "pearson",
    "regress",
    "spearman",
    "stratified_folds",
    "to_distance",
]
