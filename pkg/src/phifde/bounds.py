"""Gronwall envelopes, a-priori and continuous-dependence bounds, and the
comparison principle for the linear two-term problem."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import Expr, evaluate
from .phicalc import Grid, GridFunction, PhiMap
from .solver import LinearForcing, ProblemSpec, SolverConfig, solve_linear
from .special import gamma_fn, ml_one

__all__ = [
    "BoundInputs",
    "ComparisonReport",
    "gronwall_envelope",
    "a_priori_estimate",
    "continuous_dependence_bound",
    "dependence_coefficient",
    "comparison_check",
    "f_star",
]

_COMPARISON_FLOOR = -1.0e-9


@dataclass(frozen=True)
class BoundInputs:
    """Constants entering the envelopes.

    ``lipschitz_L`` bounds ``|F(t, z1) - F(t, z2)| <= L |z1 - z2|``,
    ``f_star`` is ``sup_t |F(t, 0)|``, ``monotone_M`` is the one-sided
    constant of the uniqueness hypothesis (carried, not used by any bound)
    and ``delta_z_a`` the perturbation of the initial value.
    """

    lipschitz_L: float = 0.0
    f_star: float = 0.0
    monotone_M: float = 0.0
    delta_z_a: float = 0.0

    def __post_init__(self) -> None:
        for name in ("lipschitz_L", "f_star", "monotone_M", "delta_z_a"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{name} must be a finite nonnegative number, got {value!r}")


def _span(p: ProblemSpec) -> float:
    phi_a, phi_b = p.phi.values(np.array([p.a, p.b]))
    return float(phi_b - phi_a)


def gronwall_envelope(v: GridFunction, w: float, mu: float, phi: PhiMap) -> GridFunction:
    """``v(l) E_mu(Gamma(mu) w (Phi(l) - Phi(a))^mu)`` for nondecreasing ``v``."""
    if not w >= 0.0:
        raise ValueError(f"w must be nonnegative, got {w!r}")
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must lie in (0, 1], got {mu!r}")
    drops = np.nonzero(np.diff(v.values) < 0.0)[0]
    if drops.size:
        raise ValueError(f"v must be nondecreasing; it decreases after node {int(drops[0])}")
    u = phi.values(v.grid.nodes)
    s = u - u[0]
    factor = np.array([ml_one(mu, gamma_fn(mu) * w * x**mu) for x in s])
    return GridFunction(v.grid, v.values * factor)


def a_priori_estimate(p: ProblemSpec, inputs: BoundInputs, corrected: bool = True) -> float:
    """Sup-norm envelope of solutions with a Lipschitz right-hand side.

    ``(|z_a| + C (Phi(b) - Phi(a))^mu / Gamma(mu + 1)) E_mu(L (Phi(b) - Phi(a))^mu)``
    with ``C = F*`` (``corrected``) or ``C = L F*`` (the constant as
    originally printed, kept for comparison).
    """
    span_mu = _span(p) ** p.mu
    forcing = inputs.f_star if corrected else inputs.lipschitz_L * inputs.f_star
    base = abs(p.z_a) + forcing * span_mu / gamma_fn(p.mu + 1.0)
    return base * ml_one(p.mu, inputs.lipschitz_L * span_mu)


def dependence_coefficient(p: ProblemSpec, lipschitz_L: float) -> float:
    """``E_mu(L (Phi(b) - Phi(a))^mu)``."""
    return ml_one(p.mu, lipschitz_L * _span(p) ** p.mu)


def continuous_dependence_bound(p: ProblemSpec, inputs: BoundInputs) -> float:
    """Bound on ``sup |z - zbar|`` for initial values ``delta_z_a`` apart."""
    return dependence_coefficient(p, inputs.lipschitz_L) * inputs.delta_z_a


def f_star(rhs: Expr, grid: Grid) -> float:
    """``max_i |F(l_i, 0)|`` over the grid nodes."""
    return max(abs(evaluate(rhs, t=t, z=0.0)) for t in grid.nodes)


@dataclass(frozen=True)
class ComparisonReport:
    ok: bool
    min_value: float
    argmin_node: int
    solution: GridFunction


def comparison_check(
    mu: float,
    kappa: float,
    omega: float,
    phi: PhiMap,
    h_forcing: LinearForcing,
    gamma_a: float,
    cfg: SolverConfig,
) -> ComparisonReport:
    """Solve the linear problem with nonnegative data and report its minimum.

    Nonnegative forcing and initial value must give a nonnegative solution;
    the check passes when every node is at least ``-1e-9``.
    """
    if not gamma_a >= 0.0:
        raise ValueError(f"initial value must be nonnegative, got {gamma_a!r}")
    grid = cfg.grid
    forcing = np.array([evaluate(h_forcing.h, t=t) for t in grid.nodes])
    negative = np.nonzero(forcing < 0.0)[0]
    if negative.size:
        j = int(negative[0])
        raise ValueError(f"forcing is negative at node {j} (t={grid.nodes[j]:.6g})")
    p = ProblemSpec(mu, kappa, omega, grid.a, grid.b, gamma_a, h_forcing.h, phi)
    z = solve_linear(p, h_forcing, cfg)
    j = int(np.argmin(z.values))
    low = float(z.values[j])
    return ComparisonReport(low >= _COMPARISON_FLOOR, low, j, z)
