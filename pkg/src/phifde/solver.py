"""Resolvent solver for the linear two-term problem and the monotone iteration.

The problem is

.. math::

    {}^cD^{\\mu;\\Phi} z + \\omega \\, {}^cD^{\\kappa;\\Phi} z = F(\\ell, z),
    \\qquad z(a) = z_a, \\qquad 0 < \\kappa < \\mu \\le 1.

With ``F`` replaced by a forcing ``H(l)`` its solution is

.. math::

    z(\\ell) = z_a + \\int_a^\\ell \\Phi'(\\rho) (\\Phi(\\ell) - \\Phi(\\rho))^{\\mu - 1}
        E_{\\mu-\\kappa,\\mu}(-\\omega (\\Phi(\\ell) - \\Phi(\\rho))^{\\mu-\\kappa}) H(\\rho) \\, d\\rho,

and the monotone iteration applies the same operator to ``F(rho, z_n(rho))``
starting from a lower and an upper solution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .expr import DomainError, EvalError, Expr, evaluate, variables
from .phicalc import Grid, GridFunction, PhiMap, caputo_deriv, validate_phi
from .special import DEFAULT_CONTROL, SeriesControl, ln_gamma, ml_two_array, rgamma
from .volterra import QuadratureScheme, kernel_series_matrix, simpson_weights, weight_matrix

__all__ = [
    "ProblemSpec",
    "LinearForcing",
    "SolverConfig",
    "SolutionCheck",
    "IterationReport",
    "HypothesisError",
    "NodeEvaluationError",
    "GridMismatchError",
    "resolvent_matrix",
    "solve_linear",
    "iterate_once",
    "run_extremal",
    "check_lower_solution",
    "check_upper_solution",
    "monotonicity_spot_check",
    "error_norm",
    "solve_picard",
]

DEFAULT_SLACK = 1.0e-3


class HypothesisError(ValueError):
    """A hypothesis of the monotone iteration failed (e.g. a seed is not a
    lower solution)."""

    def __init__(self, hypothesis: str, message: str, node: int | None = None) -> None:
        self.hypothesis = hypothesis
        self.node = node
        super().__init__(f"{hypothesis}: {message}")


class NodeEvaluationError(DomainError):
    def __init__(self, node: int, t: float, cause: Exception) -> None:
        self.node = node
        self.t = t
        super().__init__(f"evaluation failed at node {node} (t={t:.17g}): {cause}")


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    mu: float
    kappa: float
    omega: float
    a: float
    b: float
    z_a: float
    rhs: Expr
    phi: PhiMap

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa < self.mu <= 1.0:
            raise ValueError(f"need 0 < kappa < mu <= 1, got mu={self.mu!r}, kappa={self.kappa!r}")
        if not self.omega > 0.0:
            raise ValueError(f"omega must be positive, got {self.omega!r}")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got a={self.a!r}, b={self.b!r}")
        if not math.isfinite(self.z_a):
            raise ValueError("z_a must be finite")
        extra = variables(self.rhs) - {"t", "z"}
        if extra:
            raise ValueError(f"rhs may only use t and z, found {sorted(extra)}")


@dataclass(frozen=True)
class LinearForcing:
    h: Expr

    def __post_init__(self) -> None:
        if variables(self.h) - {"t"}:
            raise ValueError("a linear forcing term may only reference t")


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid
    scheme: QuadratureScheme = QuadratureScheme()
    max_iter: int = 25
    tol: float = 1.0e-12
    ml_control: SeriesControl = DEFAULT_CONTROL
    threads: int | None = None

    def __post_init__(self) -> None:
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.threads is not None and self.threads < 1:
            raise ValueError("threads must be a positive integer")


@dataclass(frozen=True)
class SolutionCheck:
    """Outcome of a lower/upper solution check.

    ``residual`` is the signed defect at nodes ``1..N`` oriented so that a
    valid candidate has ``residual <= slack`` everywhere.
    """

    kind: str  # "lower" or "upper"
    ok: bool
    slack: float
    worst_residual: float
    worst_node: int
    initial_ok: bool
    first_violation: int | None = None
    residual: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)

    def describe(self) -> str:
        if self.ok:
            return f"{self.kind} solution check passed (worst residual {self.worst_residual:.3e}, slack {self.slack:g})"
        if not self.initial_ok:
            return f"{self.kind} solution check failed at the initial value"
        return (
            f"{self.kind} solution check failed at node {self.first_violation} "
            f"(worst residual {self.worst_residual:.3e}, slack {self.slack:g})"
        )


@dataclass(frozen=True)
class IterationReport:
    lower_iterates: tuple[GridFunction, ...]
    upper_iterates: tuple[GridFunction, ...]
    error_norms: tuple[float, ...]
    converged: bool
    iterations_used: int
    warnings: tuple[str, ...] = ()
    checks: tuple[SolutionCheck, ...] = ()
    forced: bool = False

    @property
    def unique(self) -> bool:
        """Both sequences met within tolerance, so the extremal solutions coincide."""
        return self.converged

    @property
    def lower(self) -> GridFunction:
        return self.lower_iterates[-1]

    @property
    def upper(self) -> GridFunction:
        return self.upper_iterates[-1]


# {{{ resolvent


_SERIES_GROWTH_LIMIT = 1.0e3
_SERIES_MAX_TERMS = 400


def _kernel_coefficients(beta: float, mu: float, omega: float, s_max: float) -> tuple[float, ...] | None:
    """Coefficients of ``E_{beta,mu}(-omega s^beta)`` as a series in ``s^beta``,
    or ``None`` when the alternating series would cancel too badly on
    ``[0, s_max]``."""
    coeffs = []
    growth = 0.0
    for k in range(_SERIES_MAX_TERMS):
        c = (-omega) ** k * rgamma(k * beta + mu)
        size = abs(c) * s_max ** (k * beta)
        growth += size
        coeffs.append(c)
        ratio = omega * s_max**beta * math.exp(ln_gamma(k * beta + mu) - ln_gamma((k + 1) * beta + mu))
        if ratio < 0.5 and size < 1e-18:
            break
    else:
        return None
    if growth > _SERIES_GROWTH_LIMIT:
        return None
    return tuple(coeffs)


@lru_cache(maxsize=32)
def resolvent_matrix(
    phi: PhiMap,
    grid: Grid,
    mu: float,
    kappa: float,
    omega: float,
    kind: str = "product_trapezoid",
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> np.ndarray:
    """Lower-triangular weights ``R`` with ``z_i = z_a + sum_j R[i, j] g_j``.

    For the product rule the whole resolvent kernel is expanded in powers of
    ``Phi(l) - Phi(rho)`` and every power is integrated exactly, so only the
    forcing is interpolated. When that expansion cancels too badly (large
    ``omega (Phi(b) - Phi(a))^(mu - kappa)``), and for the Simpson variant,
    the Mittag-Leffler factor is sampled at the nodes and treated as part of
    the integrand instead.
    """
    u = phi.values(grid.nodes)
    beta = mu - kappa
    if kind == "product_trapezoid":
        coeffs = _kernel_coefficients(beta, mu, omega, float(u[-1] - u[0]))
        if coeffs is not None:
            return kernel_series_matrix(phi, grid, mu, beta, coeffs)
    w = weight_matrix(phi, grid, float(mu), kind)
    diff = u[:, None] - u[None, :]
    rows, cols = np.tril_indices(len(u))
    arg = -omega * diff[rows, cols] ** beta
    kernel = np.zeros_like(diff)
    kernel[rows, cols] = ml_two_array(beta, mu, arg, ctl)
    r = w * kernel
    r.setflags(write=False)
    return r


def _resolvent(p: ProblemSpec, cfg: SolverConfig) -> np.ndarray:
    if (p.a, p.b) != (cfg.grid.a, cfg.grid.b):
        raise GridMismatchError(
            f"grid spans [{cfg.grid.a}, {cfg.grid.b}] but the problem lives on [{p.a}, {p.b}]"
        )
    return resolvent_matrix(
        p.phi, cfg.grid, float(p.mu), float(p.kappa), float(p.omega), cfg.scheme.kind, cfg.ml_control
    )


def _apply(p: ProblemSpec, cfg: SolverConfig, g: np.ndarray) -> GridFunction:
    r = _resolvent(p, cfg)
    n = cfg.grid.n_intervals

    def row(i: int) -> float:
        return p.z_a + math.fsum(r[i, : i + 1] * g[: i + 1])

    threads = cfg.threads or 1
    if threads > 1 and n >= 64:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rest = list(pool.map(row, range(1, n + 1)))
    else:
        rest = [row(i) for i in range(1, n + 1)]
    return GridFunction(cfg.grid, np.array([p.z_a, *rest]))


def _sample(e: Expr, grid: Grid, z: np.ndarray | None = None) -> np.ndarray:
    out = np.empty(grid.n_intervals + 1)
    for j, t in enumerate(grid.nodes):
        try:
            out[j] = evaluate(e, t=t, z=None if z is None else z[j])
        except EvalError as exc:
            raise NodeEvaluationError(j, float(t), exc) from None
    return out


def _require_phi(p: ProblemSpec, grid: Grid) -> None:
    report = validate_phi(p.phi, grid)
    if not report.ok:
        raise ValueError(f"invalid weight function: {report.reason}")


def solve_linear(p: ProblemSpec, f: LinearForcing, cfg: SolverConfig) -> GridFunction:
    """Solution of the linear problem with forcing ``f.h(t)``."""
    _require_phi(p, cfg.grid)
    return _apply(p, cfg, _sample(f.h, cfg.grid))


def iterate_once(p: ProblemSpec, current: GridFunction, cfg: SolverConfig) -> GridFunction:
    """One step of the monotone iteration starting from ``current``."""
    if current.grid != cfg.grid:
        raise GridMismatchError("iterate is not defined on the configured grid")
    return _apply(p, cfg, _sample(p.rhs, cfg.grid, current.values))


# }}}


# {{{ hypothesis checks


def _residual(p: ProblemSpec, candidate: GridFunction) -> np.ndarray:
    d_mu = caputo_deriv(p.mu, p.phi, candidate).values
    d_kappa = caputo_deriv(p.kappa, p.phi, candidate).values
    rhs = _sample(p.rhs, candidate.grid, candidate.values)
    return d_mu + p.omega * d_kappa - rhs


def _check(p: ProblemSpec, candidate: GridFunction, slack: float, kind: str) -> SolutionCheck:
    sign = 1.0 if kind == "lower" else -1.0
    res = sign * _residual(p, candidate)[1:]
    initial_ok = sign * (candidate.values[0] - p.z_a) <= slack
    bad = np.nonzero(res > slack)[0]
    worst = int(np.argmax(res))
    first = int(bad[0]) + 1 if bad.size else None
    if first is None and not initial_ok:
        first = 0
    return SolutionCheck(
        kind=kind,
        ok=bool(initial_ok and bad.size == 0),
        slack=slack,
        worst_residual=float(res[worst]),
        worst_node=worst + 1,
        initial_ok=bool(initial_ok),
        first_violation=first,
        residual=res,
    )


def check_lower_solution(
    p: ProblemSpec, candidate: GridFunction, slack: float = DEFAULT_SLACK
) -> SolutionCheck:
    """Check the lower-solution inequalities at nodes ``1..N`` and at ``a``."""
    return _check(p, candidate, slack, "lower")


def check_upper_solution(
    p: ProblemSpec, candidate: GridFunction, slack: float = DEFAULT_SLACK
) -> SolutionCheck:
    return _check(p, candidate, slack, "upper")


def monotonicity_spot_check(
    p: ProblemSpec, lower: GridFunction, upper: GridFunction, samples: int = 8
) -> list[str]:
    """Sample ``F(t, z1) <= F(t, z2)`` for ``z1 < z2`` inside the sector.

    Returns human-readable warnings; an empty list means no violation was seen.
    """
    grid = lower.grid
    nodes = np.unique(np.linspace(0, grid.n_intervals, min(samples, grid.n_intervals + 1)).astype(int))
    fractions = np.linspace(0.0, 1.0, 5)
    warnings = []
    for j in nodes:
        t = float(grid.nodes[j])
        lo, hi = float(lower.values[j]), float(upper.values[j])
        try:
            vals = [evaluate(p.rhs, t=t, z=lo + s * (hi - lo)) for s in fractions]
        except EvalError as exc:
            warnings.append(f"rhs could not be evaluated in the sector at t={t:.6g}: {exc}")
            continue
        drops = np.diff(vals)
        scale = max(1.0, max(abs(v) for v in vals))
        if np.any(drops < -1e-12 * scale):
            warnings.append(f"rhs is not nondecreasing in z at t={t:.6g} on [{lo:.6g}, {hi:.6g}]")
    return warnings


# }}}


def error_norm(lower: GridFunction, upper: GridFunction) -> float:
    """Squared L2 distance of the two functions (composite Simpson)."""
    if lower.grid != upper.grid:
        raise GridMismatchError("error_norm needs both functions on the same grid")
    g = lower.grid
    d = upper.values - lower.values
    return math.fsum(simpson_weights(g.n_intervals, g.h) * d * d)


def run_extremal(
    p: ProblemSpec,
    lower0: Expr,
    upper0: Expr,
    cfg: SolverConfig,
    *,
    force: bool = False,
    slack: float = DEFAULT_SLACK,
) -> IterationReport:
    """Monotone iteration from the lower seed ``lower0`` and upper seed ``upper0``.

    Both sequences advance together; ``E_n`` is recorded after every joint
    step and iteration stops once ``E_n <= cfg.tol`` (at least one step is
    always taken) or after ``cfg.max_iter`` steps. Failed hypotheses raise
    :class:`HypothesisError` unless ``force`` is set, in which case they are
    recorded as warnings.
    """
    grid = cfg.grid
    _require_phi(p, grid)
    for name, seed in (("lower seed", lower0), ("upper seed", upper0)):
        if variables(seed) - {"t"}:
            raise ValueError(f"{name} may only reference t")
    lo = GridFunction(grid, _sample(lower0, grid))
    hi = GridFunction(grid, _sample(upper0, grid))

    warnings: list[str] = []

    def fail(hypothesis: str, message: str, node: int | None) -> None:
        if not force:
            raise HypothesisError(hypothesis, message, node)
        warnings.append(f"{hypothesis}: {message} (forced)")

    checks = (check_lower_solution(p, lo, slack), check_upper_solution(p, hi, slack))
    for c in checks:
        if not c.ok:
            fail(f"{c.kind} seed", c.describe(), c.first_violation)
    below = np.nonzero(lo.values > hi.values)[0]
    if below.size:
        j = int(below[0])
        fail("seed ordering", f"lower seed exceeds upper seed at node {j}", j)
    warnings.extend(f"monotonicity: {w}" for w in monotonicity_spot_check(p, lo, hi))

    lowers, uppers = [lo], [hi]
    errors = [error_norm(lo, hi)]
    converged = False
    for _ in range(cfg.max_iter):
        lo = iterate_once(p, lo, cfg)
        hi = iterate_once(p, hi, cfg)
        lowers.append(lo)
        uppers.append(hi)
        errors.append(error_norm(lo, hi))
        if errors[-1] <= cfg.tol:
            converged = True
            break
    return IterationReport(
        lower_iterates=tuple(lowers),
        upper_iterates=tuple(uppers),
        error_norms=tuple(errors),
        converged=converged,
        iterations_used=len(errors) - 1,
        warnings=tuple(warnings),
        checks=checks,
        forced=force,
    )


def solve_picard(
    p: ProblemSpec,
    cfg: SolverConfig,
    seed: GridFunction | None = None,
    *,
    max_iter: int = 200,
    tol: float = 1.0e-13,
) -> GridFunction:
    """Fixed point of the discrete integral operator by plain Picard iteration.

    Converges for Lipschitz right-hand sides on a bounded interval; raises
    ``ArithmeticError`` if the sup-norm update does not fall below ``tol``.
    """
    z = seed or GridFunction.constant(cfg.grid, p.z_a)
    for _ in range(max_iter):
        nxt = iterate_once(p, z, cfg)
        step = float(np.max(np.abs(nxt.values - z.values)))
        z = nxt
        if step <= tol * max(1.0, float(np.max(np.abs(z.values)))):
            return z
    raise ArithmeticError(f"Picard iteration did not converge in {max_iter} steps")
