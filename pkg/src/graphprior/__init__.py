"""Graph-based collective classification with inaccurate class priors."""
from .errors import (
    ConfigError,
    DegenerateClassError,
    DivergenceError,
    GraphPriorError,
    InputError,
    SingularSystemError,
)
from .graph import SparseWeightedGraph, build_graph, from_scipy
from .priors import NoiseSpec, accuracy, generate_noisy_priors, scheme_scores, select_subset
from .quadratic import QuadraticConfig, Solution, solve_generic, solve_gfhf, solve_lgc
from .distribution import RegionMethodConfig, run_region_method, wvrn
from .model_selection import CVPlan, cv_select, make_doubling_grid
from .experiment import ExperimentSpec, RunRecord, aggregate, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateClassError", "DivergenceError", "GraphPriorError", "InputError",
    "SingularSystemError", "SparseWeightedGraph", "build_graph", "from_scipy", "NoiseSpec",
    "accuracy", "generate_noisy_priors", "scheme_scores", "select_subset", "QuadraticConfig",
    "Solution", "solve_generic", "solve_gfhf", "solve_lgc", "RegionMethodConfig",
    "run_region_method", "wvrn", "CVPlan", "cv_select", "make_doubling_grid", "ExperimentSpec",
    "RunRecord", "aggregate", "run_experiment",
]
