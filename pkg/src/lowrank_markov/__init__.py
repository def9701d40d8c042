"""Low-rank Markov transition matrix estimation by rank-constrained likelihood."""

from .errors import ConvergenceError, RankInfeasibleError
from .estimators import KINDS, EstimatorSpec, cross_validate_lambda, estimate
from .harness import ExperimentConfig, emit_plot_data, run_experiment
from .likelihood import LikelihoodData, empirical_mle, neg_loglik
from .markov_model import (
    StationaryDistribution,
    TransitionCounts,
    TransitionMatrix,
    Trajectory,
    count_transitions,
    downsample,
    generate_aggregated,
    generate_latent_lowrank,
    simulate,
    stationary_distribution,
)
from .metrics import EvalResult, evaluate

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "RankInfeasibleError",
    "KINDS",
    "EstimatorSpec",
    "cross_validate_lambda",
    "estimate",
    "ExperimentConfig",
    "emit_plot_data",
    "run_experiment",
    "LikelihoodData",
    "empirical_mle",
    "neg_loglik",
    "StationaryDistribution",
    "TransitionCounts",
    "TransitionMatrix",
    "Trajectory",
    "count_transitions",
    "downsample",
    "generate_aggregated",
    "generate_latent_lowrank",
    "simulate",
    "stationary_distribution",
    "EvalResult",
    "evaluate",
]
