"""Nonlinear Rayleigh quotients and Nehari manifold minimization for
``(-Delta)^s u + V u = lam a |u|^(q-2) u + b f(u)`` on a periodic box."""

__version__ = "0.1.0"

from .energy import FunctionalValue, derivative_pairing, evaluate, residual_field, second_derivative_diag
from .extremal import ExtremalEstimate, certify_gap, estimate_extremals
from .fibers import FiberReport, fiber_report, find_t_e, find_t_n, lambda_e, lambda_n, nehari_roots, zero_energy_roots
from .grid import Grid, build_grid
from .hypotheses import HypothesisReport, check_hypotheses
from .nonlinearity import Nonlinearity, custom, log_power, power_sum
from .problem import ProblemSpec
from .solver import SolveResult, classify_trichotomy, solve_bound, solve_branch, solve_ground

__all__ = [
    "ExtremalEstimate",
    "FiberReport",
    "FunctionalValue",
    "Grid",
    "HypothesisReport",
    "Nonlinearity",
    "ProblemSpec",
    "SolveResult",
    "build_grid",
    "certify_gap",
    "check_hypotheses",
    "classify_trichotomy",
    "custom",
    "derivative_pairing",
    "estimate_extremals",
    "evaluate",
    "fiber_report",
    "find_t_e",
    "find_t_n",
    "lambda_e",
    "lambda_n",
    "log_power",
    "nehari_roots",
    "power_sum",
    "residual_field",
    "second_derivative_diag",
    "solve_bound",
    "solve_branch",
    "solve_ground",
    "zero_energy_roots",
]
