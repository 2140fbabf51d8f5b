"""Weighted p-median metaheuristics for bicycle-station placement."""

from .algorithms import RUNNERS, RunResult, run
from .config import AlgorithmConfig, ConfigError, iteration_budget, load_config, load_preset, parse_config
from .distances import DistanceMatrix, StreetGraph, euclidean_matrix, graph_matrix, load_matrix, save_matrix
from .evaluation import AssignmentState, Solution, apply_swap, evaluate, mean_walk_distance, swap_delta
from .instance import Instance, load_instance, write_instance
from .stats import ecdf, percent_improvement, wilcoxon_rank_sum
from .synth import generate_synthetic_city

__version__ = "0.1.0"

__all__ = [
    "RUNNERS",
    "AlgorithmConfig",
    "AssignmentState",
    "ConfigError",
    "DistanceMatrix",
    "Instance",
    "RunResult",
    "Solution",
    "StreetGraph",
    "apply_swap",
    "ecdf",
    "euclidean_matrix",
    "evaluate",
    "generate_synthetic_city",
    "graph_matrix",
    "iteration_budget",
    "load_config",
    "load_instance",
    "load_matrix",
    "load_preset",
    "mean_walk_distance",
    "parse_config",
    "percent_improvement",
    "run",
    "save_matrix",
    "swap_delta",
    "wilcoxon_rank_sum",
]
