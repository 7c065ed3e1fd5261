"""Weight functions, grids and numerical Phi-fractional operators.

For an increasing weight ``Phi`` the fractional integral of order ``mu`` is

.. math::

    I^{\\mu;\\Phi} f(\\ell) = \\frac{1}{\\Gamma(\\mu)} \\int_a^\\ell
        \\Phi'(\\rho) (\\Phi(\\ell) - \\Phi(\\rho))^{\\mu - 1} f(\\rho) \\, d\\rho

and the Caputo-type derivative of order ``mu`` in (0, 1) is
``I^{1 - mu;Phi}`` applied to ``f' / Phi'``.
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .expr import DomainError, Expr, evaluate, parse, variables
from .special import gamma_fn
from .volterra import weight_matrix

__all__ = [
    "PhiMap",
    "Grid",
    "GridFunction",
    "PhiValidation",
    "validate_phi",
    "frac_integral",
    "frac_integral_all",
    "caputo_deriv",
    "power_integral_cf",
    "power_deriv_cf",
]

_FD_STEP = 1.0e-5
_FD_TOL = 1.0e-6


@dataclass(frozen=True)
class PhiMap:
    """The weight ``Phi`` and its derivative, both expressions in ``t``."""

    phi: Expr
    phi_prime: Expr
    label: str = ""

    def __post_init__(self) -> None:
        for e in (self.phi, self.phi_prime):
            extra = variables(e) - {"t"}
            if extra:
                raise ValueError(f"Phi expressions may only use t, found {sorted(extra)}")

    @classmethod
    def identity(cls) -> PhiMap:
        return cls(parse("t"), parse("1"), "identity")

    @classmethod
    def sigmoid(cls) -> PhiMap:
        return cls(parse("sigmoid(t)"), parse("sigmoid(t) * (1 - sigmoid(t))"), "sigmoid")

    @classmethod
    def from_text(cls, phi: str, phi_prime: str, label: str = "") -> PhiMap:
        return cls(parse(phi), parse(phi_prime), label or phi)

    def values(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.array([evaluate(self.phi, t=x) for x in t.ravel()]).reshape(t.shape)

    def derivative(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.array([evaluate(self.phi_prime, t=x) for x in t.ravel()]).reshape(t.shape)


@dataclass(frozen=True)
class Grid:
    a: float
    b: float
    n_intervals: int

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a!r}, b={self.b!r}")
        if int(self.n_intervals) != self.n_intervals or self.n_intervals < 2:
            raise ValueError(f"n_intervals must be an integer >= 2, got {self.n_intervals!r}")

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.linspace(self.a, self.b, self.n_intervals + 1)
        x[0], x[-1] = self.a, self.b
        x.setflags(write=False)
        return x

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_intervals


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of a scalar function at the nodes of ``grid`` (read-only)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_intervals + 1,):
            raise ValueError(
                f"expected {self.grid.n_intervals + 1} values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: Grid, e: Expr, z: float | None = None) -> GridFunction:
        return cls(grid, np.array([evaluate(e, t=t, z=z) for t in grid.nodes]))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> GridFunction:
        return cls(grid, np.full(grid.n_intervals + 1, float(c)))


# {{{ validation


@dataclass(frozen=True)
class PhiValidation:
    ok: bool
    first_failure: float | None = None  # abscissa of the first violation
    first_failure_node: int | None = None  # grid node index, if it is a node
    reason: str = ""


def validate_phi(phi: PhiMap, grid: Grid) -> PhiValidation:
    """Check ``Phi' > 0`` and consistency of ``Phi'`` with a central difference
    of ``Phi`` at grid nodes and midpoints."""
    nodes = grid.nodes
    points = np.empty(2 * len(nodes) - 1)
    points[0::2] = nodes
    points[1::2] = 0.5 * (nodes[:-1] + nodes[1:])
    for k, t in enumerate(points):
        node = k // 2 if k % 2 == 0 else None
        try:
            d = evaluate(phi.phi_prime, t=t)
            fd = (evaluate(phi.phi, t=t + _FD_STEP) - evaluate(phi.phi, t=t - _FD_STEP)) / (
                2.0 * _FD_STEP
            )
        except ArithmeticError as exc:
            return PhiValidation(False, float(t), node, f"evaluation failed: {exc}")
        if not d > 0.0:
            return PhiValidation(False, float(t), node, f"Phi'({t:.6g}) = {d:.6g} is not positive")
        if abs(fd - d) > _FD_TOL * max(1.0, abs(d)):
            return PhiValidation(
                False,
                float(t),
                node,
                f"Phi' inconsistent with Phi at t={t:.6g}: {d:.10g} vs difference {fd:.10g}",
            )
    return PhiValidation(True)


# }}}


# {{{ operators


def frac_integral_all(mu: float, phi: PhiMap, f: GridFunction) -> GridFunction:
    """Fractional integral of order ``mu`` in (0, 2] at every grid node."""
    if not 0.0 < mu <= 2.0:
        raise ValueError(f"mu must lie in (0, 2], got {mu!r}")
    w = weight_matrix(phi, f.grid, float(mu), "product_trapezoid")
    values = (w @ f.values) / gamma_fn(mu)
    values[0] = 0.0
    return GridFunction(f.grid, values)


def frac_integral(mu: float, phi: PhiMap, f: GridFunction, i: int) -> float:
    """Fractional integral of order ``mu`` of ``f`` evaluated at node ``i``."""
    if not 0 <= i <= f.grid.n_intervals:
        raise IndexError(f"node index {i} outside 0..{f.grid.n_intervals}")
    return float(frac_integral_all(mu, phi, f).values[i])


def phi_derivative(phi: PhiMap, f: GridFunction) -> np.ndarray:
    """``f' / Phi'`` at the nodes, second order throughout."""
    df = np.gradient(f.values, f.grid.h, edge_order=2)
    return df / phi.derivative(f.grid.nodes)


def caputo_deriv(mu: float, phi: PhiMap, f: GridFunction) -> GridFunction:
    """Caputo-type derivative of order ``mu`` in (0, 1] with respect to ``Phi``."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must lie in (0, 1], got {mu!r}")
    d = GridFunction(f.grid, phi_derivative(phi, f))
    if mu == 1.0:
        return d
    return frac_integral_all(1.0 - mu, phi, d)


def power_integral_cf(mu: float, kappa: float, s: float) -> float:
    """Fractional integral of ``s^(kappa - 1)`` in closed form."""
    if not (mu > 0 and kappa > 0 and s >= 0):
        raise ValueError("need mu > 0, kappa > 0, s >= 0")
    expo = kappa + mu - 1.0
    if s == 0.0 and expo < 0.0:
        return math.inf
    return gamma_fn(kappa) / gamma_fn(kappa + mu) * float(s) ** expo


def power_deriv_cf(mu: float, kappa: float, s: float) -> float:
    """Caputo-type derivative of ``s^(kappa - 1)`` in closed form."""
    if not kappa > mu:
        raise DomainError(f"closed form needs kappa > mu, got kappa={kappa!r}, mu={mu!r}")
    if not (mu > 0 and s > 0):
        raise ValueError("need mu > 0 and s > 0")
    return gamma_fn(kappa) / gamma_fn(kappa - mu) * s ** (kappa - mu - 1.0)


# }}}
