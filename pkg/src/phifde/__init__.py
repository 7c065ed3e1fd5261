"""Two-term Phi-Caputo fractional initial value problems: resolvent solver,
monotone iteration for extremal solutions, and Gronwall-type bounds."""

from __future__ import annotations

from .bounds import (
    BoundInputs,
    a_priori_estimate,
    comparison_check,
    continuous_dependence_bound,
    gronwall_envelope,
)
from .expr import parse
from .phicalc import Grid, GridFunction, PhiMap, caputo_deriv, frac_integral, validate_phi
from .solver import (
    IterationReport,
    LinearForcing,
    ProblemSpec,
    SolverConfig,
    check_lower_solution,
    check_upper_solution,
    error_norm,
    iterate_once,
    run_extremal,
    solve_linear,
)
from .special import SeriesControl, gamma_fn, ml_one, ml_two
from .volterra import QuadratureScheme

__version__ = "0.1.0"

__all__ = [
    "BoundInputs",
    "Grid",
    "GridFunction",
    "IterationReport",
    "LinearForcing",
    "PhiMap",
    "ProblemSpec",
    "QuadratureScheme",
    "SeriesControl",
    "SolverConfig",
    "a_priori_estimate",
    "caputo_deriv",
    "check_lower_solution",
    "check_upper_solution",
    "comparison_check",
    "continuous_dependence_bound",
    "error_norm",
    "frac_integral",
    "gamma_fn",
    "gronwall_envelope",
    "iterate_once",
    "ml_one",
    "ml_two",
    "parse",
    "run_extremal",
    "solve_linear",
    "validate_phi",
]
