"""Training-data reduction for symbolic regression.

Reduce a regression training set by random sampling, target-value binning or
mini-batch k-means centroid extraction, train symbolic-regression models with
offspring-selection GP (plus random-forest and linear baselines), and measure
the accuracy/runtime trade-off across reduction rates.
"""

from .baselines import (
    ForestConfig,
    LinearRegression,
    RandomForestRegressor,
    fit_forest,
    fit_linear,
)
from .dataset import Dataset, Normalizer, load_csv, split
from .expressions import (
    ExpressionTree,
    Grammar,
    ScaledModel,
    evaluate,
    linear_scale,
    mutate,
    optimize_constants,
    random_tree,
    subtree_crossover,
    tree_depth,
    tree_size,
)
from .gp import GpConfig, GpRunStats, SymbolicRegressor, run_gp
from .harness import (
    ExperimentConfig,
    RunResult,
    parse_config_file,
    report,
    run_experiment,
)
from .metrics import ScoreSummary, pearson_r2, summarize
from .reduction import (
    BinningReducer,
    CentroidSet,
    KMeansReducer,
    RandomSampleReducer,
    ReductionSpec,
    bin_reduce,
    kmeans_reduce,
    lloyd_kmeans,
    minibatch_kmeans,
    random_sample,
    reduce_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "BinningReducer",
    "CentroidSet",
    "Dataset",
    "ExperimentConfig",
    "ExpressionTree",
    "ForestConfig",
    "GpConfig",
    "GpRunStats",
    "Grammar",
    "KMeansReducer",
    "LinearRegression",
    "Normalizer",
    "RandomForestRegressor",
    "RandomSampleReducer",
    "ReductionSpec",
    "RunResult",
    "ScaledModel",
    "ScoreSummary",
    "SymbolicRegressor",
    "bin_reduce",
    "evaluate",
    "fit_forest",
    "fit_linear",
    "kmeans_reduce",
    "linear_scale",
    "lloyd_kmeans",
    "load_csv",
    "minibatch_kmeans",
    "mutate",
    "optimize_constants",
    "parse_config_file",
    "pearson_r2",
    "random_sample",
    "random_tree",
    "reduce_dataset",
    "report",
    "run_experiment",
    "run_gp",
    "split",
    "subtree_crossover",
    "summarize",
    "tree_depth",
    "tree_size",
]
