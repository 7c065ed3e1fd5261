"""Product-integration quadrature for weakly singular Phi-weighted kernels.

All integrals handled here have the form

.. math::

    \\int_a^{\\ell_i} \\Phi'(\\rho) (\\Phi(\\ell_i) - \\Phi(\\rho))^{\\alpha - 1}
        g(\\rho) \\, d\\rho

on a uniform grid. After the substitution ``u = Phi(rho)`` the singular
factor ``(U_i - u)^(alpha - 1)`` is integrated exactly against a
piecewise-linear interpolant of ``g`` in ``u``. The resulting weights only
depend on ``(phi, grid, alpha)`` and are cached as a lower-triangular matrix.

``phi`` is any hashable object with ``values(t)`` and ``derivative(t)``
accepting arrays; ``grid`` any hashable object with ``nodes``, ``h`` and
``n_intervals``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np

__all__ = [
    "SCHEMES",
    "QuadratureScheme",
    "SingularConvolution",
    "moment_weights",
    "moment_weights_array",
    "simpson_weights",
    "weight_matrix",
    "kernel_series_matrix",
    "convolve_at",
]

SCHEMES = ("product_trapezoid", "simpson_desingularized")

# below this panel-to-distance ratio the closed form cancels; use the series
_SERIES_CUTOFF = 0.25
_SERIES_TERMS = 40


@dataclass(frozen=True)
class QuadratureScheme:
    kind: str = "product_trapezoid"

    def __post_init__(self) -> None:
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown quadrature scheme {self.kind!r}; expected one of {SCHEMES}")


def _check_exponent(alpha: float) -> None:
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"kernel exponent must lie in (0, 2], got {alpha!r}")


# {{{ panel moments


def _g_series(alpha: float, r: np.ndarray) -> np.ndarray:
    # G(r) = int_0^r (1 + x)^(alpha - 1) x dx via the binomial series
    total = np.zeros_like(r)
    coeff = 1.0
    power = r * r
    rmax = float(np.max(r)) if r.size else 0.0
    n_terms = _SERIES_TERMS if rmax >= 1e-3 else 8
    for k in range(n_terms):
        total += coeff * power / (k + 2)
        coeff *= (alpha - 1.0 - k) / (k + 1)
        power = power * r
    return total


def _g_closed(alpha: float, r: np.ndarray) -> np.ndarray:
    log1p = np.log1p(r)
    return np.expm1((alpha + 1.0) * log1p) / (alpha + 1.0) - np.expm1(alpha * log1p) / alpha


def _moments(alpha: float, d_hi: np.ndarray, width: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # panels given by distance of the upper end to the singularity and width
    w_lo = np.zeros(width.shape)
    w_hi = np.zeros(width.shape)

    terminal = (d_hi == 0) & (width > 0)
    if np.any(terminal):
        scale = width[terminal] ** alpha
        w_lo[terminal] = scale / (alpha + 1.0)
        w_hi[terminal] = scale / (alpha * (alpha + 1.0))

    inner = (d_hi > 0) & (width > 0)
    if np.any(inner):
        d = d_hi[inner]
        r = width[inner] / d
        scale = d**alpha
        m0 = scale * np.expm1(alpha * np.log1p(r)) / alpha
        small = r < _SERIES_CUTOFF
        g = np.empty_like(r)
        g[small] = _g_series(alpha, r[small])
        g[~small] = _g_closed(alpha, r[~small])
        lo = scale * g / r
        w_lo[inner] = lo
        w_hi[inner] = m0 - lo
    return w_lo, w_hi


def moment_weights_array(
    alpha: float, u_lo: np.ndarray, u_hi: np.ndarray, u_top: float | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`moment_weights` over many panels sharing ``alpha``."""
    _check_exponent(alpha)
    u_lo, u_hi, u_top = np.broadcast_arrays(
        np.asarray(u_lo, dtype=float), np.asarray(u_hi, dtype=float), np.asarray(u_top, dtype=float)
    )
    width = u_hi - u_lo
    d_hi = u_top - u_hi
    if np.any(width < 0) or np.any(d_hi < 0):
        raise ValueError("panels must satisfy u_lo <= u_hi <= u_top")
    return _moments(alpha, d_hi, width)


def moment_weights(alpha: float, u_lo: float, u_hi: float, u_top: float) -> tuple[float, float]:
    """Weights ``(w_lo, w_hi)`` with

    ``int_{u_lo}^{u_hi} (u_top - u)^(alpha - 1) g(u) du = w_lo g(u_lo) + w_hi g(u_hi)``

    exact for every linear ``g``. A degenerate panel gives ``(0, 0)``.
    """
    if u_lo == u_hi:
        return 0.0, 0.0
    if not u_lo < u_hi <= u_top:
        raise ValueError(f"need u_lo < u_hi <= u_top, got {u_lo!r}, {u_hi!r}, {u_top!r}")
    w_lo, w_hi = moment_weights_array(alpha, np.array([u_lo]), np.array([u_hi]), u_top)
    return float(w_lo[0]), float(w_hi[0])


# }}}


# {{{ regular rules


def simpson_weights(n_panels: int, h: float) -> np.ndarray:
    """Composite Simpson weights on ``n_panels + 1`` equispaced points.

    An odd panel count closes with the 3/8 rule on the last three panels, so
    cubics are integrated exactly for every ``n_panels >= 2``; a single panel
    falls back to the trapezoid rule.
    """
    if n_panels < 1:
        raise ValueError("need at least one panel")
    w = np.zeros(n_panels + 1)
    if n_panels == 1:
        w[:] = h / 2.0
        return w
    n_simpson = n_panels if n_panels % 2 == 0 else n_panels - 3
    for k in range(0, n_simpson, 2):
        w[k : k + 3] += np.array([1.0, 4.0, 1.0]) * (h / 3.0)
    if n_simpson < n_panels:
        w[n_simpson:] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


# }}}


# {{{ weight matrices


def _panels(u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # every (row i, panel [j, j+1]) pair with j < i
    rows, cols = np.tril_indices(len(u), -1)
    return rows, cols, u[rows] - u[cols + 1], u[cols + 1] - u[cols]


def _scatter(n: int, rows, cols, w_lo, w_hi) -> np.ndarray:
    w = np.zeros((n, n))
    np.add.at(w, (rows, cols), w_lo)
    np.add.at(w, (rows, cols + 1), w_hi)
    return w


def _product_trapezoid(u: np.ndarray, alpha: float) -> np.ndarray:
    rows, cols, d_hi, width = _panels(u)
    return _scatter(len(u), rows, cols, *_moments(alpha, d_hi, width))


def _simpson_desingularized(u: np.ndarray, du: np.ndarray, h: float, alpha: float) -> np.ndarray:
    n = len(u) - 1
    w = np.zeros((n + 1, n + 1))
    for i in range(1, n + 1):
        # regular part on [a, l_{i-1}] where the kernel is bounded
        if i >= 2:
            kernel = du[:i] * (u[i] - u[:i]) ** (alpha - 1.0)
            w[i, :i] += simpson_weights(i - 1, h) * kernel
        w_lo, w_hi = moment_weights(alpha, u[i - 1], u[i], u[i])
        w[i, i - 1] += w_lo
        w[i, i] += w_hi
    return w


@lru_cache(maxsize=64)
def weight_matrix(phi: Any, grid: Any, alpha: float, kind: str = "product_trapezoid") -> np.ndarray:
    """Lower-triangular ``W`` with ``sum_j W[i, j] g_j`` approximating the
    kernel integral up to node ``i``. Row 0 is zero. The result is read-only."""
    _check_exponent(alpha)
    QuadratureScheme(kind)
    nodes = np.asarray(grid.nodes, dtype=float)
    u = np.asarray(phi.values(nodes), dtype=float)
    if np.any(np.diff(u) <= 0):
        raise ValueError("Phi must be strictly increasing on the grid")
    if kind == "product_trapezoid":
        w = _product_trapezoid(u, alpha)
    else:
        du = np.asarray(phi.derivative(nodes), dtype=float)
        w = _simpson_desingularized(u, du, float(grid.h), alpha)
    w.setflags(write=False)
    return w


@lru_cache(maxsize=16)
def kernel_series_matrix(
    phi: Any, grid: Any, alpha: float, beta: float, coeffs: tuple[float, ...]
) -> np.ndarray:
    """Product-trapezoid weights for the kernel ``sum_k c_k s^(alpha + k beta - 1)``.

    Each power is integrated exactly against the piecewise-linear interpolant,
    so a kernel that is itself a (convergent) power series in ``s^beta``, such
    as a Mittag-Leffler resolvent, needs no smoothness of its own.
    """
    _check_exponent(alpha)
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    u = np.asarray(phi.values(np.asarray(grid.nodes, dtype=float)), dtype=float)
    if np.any(np.diff(u) <= 0):
        raise ValueError("Phi must be strictly increasing on the grid")
    rows, cols, d_hi, width = _panels(u)
    total_lo = np.zeros(d_hi.shape)
    total_hi = np.zeros(d_hi.shape)
    for k, c in enumerate(coeffs):
        if c == 0.0:
            continue
        w_lo, w_hi = _moments(alpha + k * beta, d_hi, width)
        total_lo += c * w_lo
        total_hi += c * w_hi
    w = _scatter(len(u), rows, cols, total_lo, total_hi)
    w.setflags(write=False)
    return w


# }}}


@dataclass(frozen=True)
class SingularConvolution:
    """Kernel integral with a node-dependent smooth factor.

    ``smooth_factor(i)`` returns the factor sampled at nodes ``0..i`` for the
    integral ending at node ``i``; it may depend on ``i`` (e.g. through a
    Mittag-Leffler kernel in ``Phi(l_i) - Phi(rho_j)``).
    """

    exponent: float
    smooth_factor: Callable[[int], np.ndarray]
    phi: Any
    grid: Any

    def __post_init__(self) -> None:
        _check_exponent(self.exponent)


def convolve_at(c: SingularConvolution, i: int, scheme: QuadratureScheme | None = None) -> float:
    scheme = scheme or QuadratureScheme()
    if not 1 <= i <= c.grid.n_intervals:
        raise IndexError(f"node index {i} outside 1..{c.grid.n_intervals}")
    w = weight_matrix(c.phi, c.grid, float(c.exponent), scheme.kind)
    g = np.asarray(c.smooth_factor(i), dtype=float)
    if g.shape != (i + 1,):
        raise ValueError(f"smooth_factor({i}) must have {i + 1} entries, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError(f"smooth_factor({i}) is not finite")
    return math.fsum(w[i, : i + 1] * g)
