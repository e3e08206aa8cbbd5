"""Dynamic programming on pruned trees for finite-horizon optimal control,
with POD model reduction and feedback reconstruction."""

from .dynamics import (ControlGrid, ControlProblem, LinearQuadraticProblem, PolynomialProblem, TimeGrid,
                       euler_step, evaluate_trajectory_cost, simulate, stage_cost)
from .errors import ConfigError, DegenerateInputError, DivergenceError, TreeSizeError
from .feedback import (SynthesisResult, closed_loop_cost, refine_grid, synthesize_comparison,
                       synthesize_quadratic)
from .interp import ScatteredInterpolant, fit_quadratic, interpolate, minimize_quadratic_stage, shepard
from .lqr import LqrProblem, RiccatiSolution, lqr_closed_loop, lqr_value, solve_riccati
from .pod import PodBasis, compute_svd, pod_basis, reduce_problem, select_rank, snapshot_matrix
from .tree import Tree, build_tree, full_cardinality_log10, pruned_full_ratio, sub_tree_nodes
from .value import ValueTable, backward_sweep, extract_tree_trajectory

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ControlGrid", "ControlProblem", "DegenerateInputError", "DivergenceError",
    "LinearQuadraticProblem", "LqrProblem", "PodBasis", "PolynomialProblem", "RiccatiSolution",
    "ScatteredInterpolant", "SynthesisResult", "TimeGrid", "Tree", "TreeSizeError", "ValueTable",
    "backward_sweep", "build_tree", "closed_loop_cost", "compute_svd", "euler_step",
    "evaluate_trajectory_cost", "extract_tree_trajectory", "fit_quadratic", "full_cardinality_log10",
    "interpolate", "lqr_closed_loop", "lqr_value", "minimize_quadratic_stage", "pod_basis",
    "pruned_full_ratio", "reduce_problem", "refine_grid", "select_rank", "shepard", "simulate",
    "snapshot_matrix", "solve_riccati", "stage_cost", "sub_tree_nodes", "synthesize_comparison",
    "synthesize_quadratic",
]
