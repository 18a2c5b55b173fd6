"""Bayesian optimization of reaction conditions that generalize across substrates."""

from .aggregation import AggregationSpec, aggregate_samples, generality_table, true_generality
from .benchmarks import (
    SplitSpec,
    grid_search_optimum,
    load_surface,
    normalized_generality_score,
    split_tasks,
    synthetic_surface,
    transferability_sweep,
    write_surface,
)
from .campaign import CampaignSettings, Trajectory, aggregate_runs, gap, run_campaign, run_many
from .core import (
    Fingerprint,
    GeneralityProblem,
    GenboError,
    LookupSurface,
    MissingCellError,
    Observation,
    ObservationSet,
    ParameterPoint,
    ProblemError,
    SurfaceFormatError,
    TaskPoint,
)
from .gp import GPModel, PairSpace, fit, fit_indices
from .strategies import STANDARD_STRATEGIES, StrategySpec, WMode, parse_strategy
from .tanimoto import BACKEND

__version__ = "0.1.0"

__all__ = [
    "AggregationSpec", "aggregate_samples", "generality_table", "true_generality",
    "SplitSpec", "grid_search_optimum", "load_surface", "normalized_generality_score",
    "split_tasks", "synthetic_surface", "transferability_sweep", "write_surface",
    "CampaignSettings", "Trajectory", "aggregate_runs", "gap", "run_campaign", "run_many",
    "Fingerprint", "GeneralityProblem", "GenboError", "LookupSurface", "MissingCellError",
    "Observation", "ObservationSet", "ParameterPoint", "ProblemError", "SurfaceFormatError",
    "TaskPoint", "GPModel", "PairSpace", "fit", "fit_indices", "STANDARD_STRATEGIES",
    "StrategySpec", "WMode", "parse_strategy", "BACKEND", "__version__",
]
