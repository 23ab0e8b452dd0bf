"""Cluster-regularized matrix factorization for rating prediction.

Provides MovieLens-format ingestion, tag-interest user clustering,
user-user similarity weights, SGD-trained factor models (plus mean
baselines), and an experiment harness producing CSV reports.
"""

from ucmf.ingest import (
    ParseError,
    RatingDataset,
    SplitSpec,
    TagCatalog,
    parse_movies,
    parse_ratings,
    split,
)
from ucmf.clustering import (
    ClusterAssignment,
    ClusteringConfig,
    InterestMatrix,
    UserKMeans,
    build_interest_matrix,
    kmeans,
)
from ucmf.similarity import NeighborWeights, build_neighbor_weights, vss
from ucmf.factorization import (
    ClusterRegularizedMF,
    MatrixFactorization,
    MeanBaseline,
    TrainingConfig,
    TrainingDivergedError,
    gradient,
    load_model,
    objective,
    save_model,
    train_baseline,
    train_mf,
    train_ucmf,
)
from ucmf.evaluation import (
    EvaluationReport,
    SweepSpec,
    derive_seed,
    mae,
    rmse,
    run_experiment,
    sweep,
)

__all__ = [
    "ParseError",
    "RatingDataset",
    "TagCatalog",
    "SplitSpec",
    "parse_ratings",
    "parse_movies",
    "split",
    "InterestMatrix",
    "ClusteringConfig",
    "ClusterAssignment",
    "UserKMeans",
    "build_interest_matrix",
    "kmeans",
    "NeighborWeights",
    "vss",
    "build_neighbor_weights",
    "MeanBaseline",
    "MatrixFactorization",
    "ClusterRegularizedMF",
    "TrainingConfig",
    "TrainingDivergedError",
    "train_baseline",
    "train_mf",
    "train_ucmf",
    "objective",
    "gradient",
    "save_model",
    "load_model",
    "EvaluationReport",
    "SweepSpec",
    "derive_seed",
    "mae",
    "rmse",
    "run_experiment",
    "sweep",
]

__version__ = "0.1.0"
