"""Gamma function and one-/two-parameter Mittag-Leffler functions.

The Mittag-Leffler function

.. math::

    E_{p,q}(x) = \\sum_{k=0}^\\infty \\frac{x^k}{\\Gamma(pk + q)}

is summed directly whenever the Taylor series is numerically benign (the
regime used by the solvers, where ``|x| <~ 1``). Large negative arguments,
where the series suffers catastrophic cancellation, are handled by an
algebraic asymptotic expansion, extended precision summation, or an integral
representation, in that order of preference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SeriesControl",
    "MLQuery",
    "MLConvergenceError",
    "DEFAULT_CONTROL",
    "gamma_fn",
    "ln_gamma",
    "rgamma",
    "ml_one",
    "ml_two",
    "ml_two_array",
]

_EPS = float(np.finfo(float).eps)
_EPS_EXTENDED = float(np.finfo(np.longdouble).eps)
_ARG_LIMIT = 50.0


class MLConvergenceError(ArithmeticError):
    """The series did not reach the requested tolerance within ``max_terms``."""


@dataclass(frozen=True)
class SeriesControl:
    abs_tol: float = 1.0e-14
    max_terms: int = 400

    def __post_init__(self) -> None:
        if not self.abs_tol >= 4.0 * _EPS:
            raise ValueError(f"abs_tol must be >= 4 eps, got {self.abs_tol!r}")
        if not 0 < self.max_terms <= 10000:
            raise ValueError(f"max_terms must be in (0, 10000], got {self.max_terms!r}")


DEFAULT_CONTROL = SeriesControl()


@dataclass(frozen=True)
class MLQuery:
    p: float
    q: float
    arg: float

    def __post_init__(self) -> None:
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p!r}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q!r}")
        if not math.isfinite(self.arg):
            raise ValueError(f"arg must be finite, got {self.arg!r}")

    def evaluate(self, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
        return ml_two(self.p, self.q, self.arg, ctl)


# {{{ gamma

# Lanczos approximation, g = 6.024680040776729583740234375, n = 13, written as
# a rational function with the exp(-g) factor folded into the numerator.
# Coefficients in decreasing powers of x.
_LANCZOS_G = 6.024680040776729583740234375
_LANCZOS_GMH = 5.524680040776729583740234375
_LANCZOS_NUM = (
    0.006061842346248906525783753964555936883222,
    0.5098416655656676188125178644804694509993,
    19.51992788247617482847860966235652136208,
    449.9445569063168119446858607650988409623,
    6955.999602515376140356310115515198987526,
    75999.29304014542649875303443598909137092,
    601859.6171681098786670226533699352302507,
    3481712.15498064590882071018964774556468,
    14605578.08768506808414169982791359218571,
    43338889.32467613834773723740590533316085,
    86363131.28813859145546927288977868422342,
    103794043.1163445451906271053616070238554,
    56906521.91347156388090791033559122686859,
)
_LANCZOS_DEN = (
    1.0,
    66.0,
    1925.0,
    32670.0,
    357423.0,
    2637558.0,
    13339535.0,
    45995730.0,
    105258076.0,
    150917976.0,
    120543840.0,
    39916800.0,
    0.0,
)


def _lanczos_sum(x: float) -> float:
    if x <= 1.0:
        num = den = 0.0
        for a, b in zip(_LANCZOS_NUM, _LANCZOS_DEN):
            num = num * x + a
            den = den * x + b
    else:
        y = 1.0 / x
        num = den = 0.0
        for a, b in zip(reversed(_LANCZOS_NUM), reversed(_LANCZOS_DEN)):
            num = num * y + a
            den = den * y + b
    return num / den


def _zgh(x: float) -> tuple[float, float]:
    """``x + g - 1/2`` and its rounding error (two-sum)."""
    s = x + _LANCZOS_GMH
    bb = s - x
    err = (x - (s - bb)) + (_LANCZOS_GMH - bb)
    return s, err


def gamma_fn(x: float) -> float:
    """Gamma function for ``x > 0``."""
    x = float(x)
    if not x > 0.0 or math.isnan(x):
        raise ValueError(f"gamma_fn requires x > 0, got {x!r}")
    if x > 171.61447887182298:
        return math.inf
    if x < 0.5:
        return gamma_fn(x + 1.0) / x
    zgh, err = _zgh(x)
    xmh = x - 0.5
    r = _lanczos_sum(x)
    if x > 100.0:
        hp = zgh ** (0.5 * xmh)
        r = r * hp / math.exp(xmh) * hp
    else:
        r = r * zgh**xmh / math.exp(xmh)
    # first-order correction for the rounding of x + g - 1/2
    return r * (1.0 + err * xmh / zgh)


def ln_gamma(x: float) -> float:
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"ln_gamma requires x > 0, got {x!r}")
    if x < 0.5:
        return ln_gamma(x + 1.0) - math.log(x)
    if x < 100.0:
        return math.log(gamma_fn(x))
    zgh, err = _zgh(x)
    return math.log(_lanczos_sum(x)) + (x - 0.5) * (math.log(zgh) - 1.0) + err * (x - 0.5) / zgh


def _sinpi(x: float) -> float:
    r = math.fmod(x, 2.0)
    if r < 0.0:
        r += 2.0
    if r == 0.0 or r == 1.0:
        return 0.0
    if r <= 0.5:
        return math.sin(math.pi * r)
    if r <= 1.5:
        return -math.sin(math.pi * (r - 1.0))
    return math.sin(math.pi * (r - 2.0))


def rgamma(x: float) -> float:
    """``1/Gamma(x)`` for any real ``x``; zero at the poles."""
    x = float(x)
    if x > 0.0:
        if x > 171.0:
            return math.exp(-ln_gamma(x))
        return 1.0 / gamma_fn(x)
    if x == math.floor(x):
        return 0.0
    # reflection: 1/Gamma(x) = sin(pi x) Gamma(1 - x) / pi
    s = _sinpi(x)
    if 1.0 - x > 171.0:
        return math.copysign(math.exp(ln_gamma(1.0 - x) + math.log(abs(s)) - math.log(math.pi)), s)
    return s * gamma_fn(1.0 - x) / math.pi


def _rgamma_envelope(x: float) -> float:
    """An upper bound for ``|1/Gamma(x)|`` that does not vanish at the poles."""
    if x >= 2.0:
        return rgamma(x)
    if x > 0.0:
        return 1.13  # max of 1/Gamma on (0, inf) is 1.1292...
    return max(math.exp(ln_gamma(1.0 - x) - math.log(math.pi)), 1.0 / math.pi)


# }}}


# {{{ Mittag-Leffler


def _check_ml_args(p: float, q: float, arg: float) -> None:
    if not 0.0 < p <= 2.0:
        raise ValueError(f"p must be in (0, 2], got {p!r}")
    if not q > 0.0:
        raise ValueError(f"q must be positive, got {q!r}")
    if not abs(arg) <= _ARG_LIMIT:
        raise ValueError(f"|arg| must be <= {_ARG_LIMIT}, got {arg!r}")


@lru_cache(maxsize=256)
def _coefficients(p: float, q: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``1/Gamma(pk + q)`` and ``-ln Gamma(pk + q)`` for ``k = 0..n-1``."""
    rg = np.empty(n)
    lrg = np.empty(n)
    for k in range(n):
        y = p * k + q
        lrg[k] = -ln_gamma(y)
        rg[k] = 1.0 / gamma_fn(y) if y < 170.0 else math.exp(lrg[k])
    rg.setflags(write=False)
    lrg.setflags(write=False)
    return rg, lrg


@lru_cache(maxsize=64)
def _coefficients_extended(p: float, q: float, n: int) -> np.ndarray:
    """``1/Gamma(pk + q)`` correctly rounded to ``np.longdouble``."""
    import mpmath

    tiny = float(np.finfo(np.longdouble).tiny)
    rg = np.zeros(n, dtype=np.longdouble)
    with mpmath.workdps(30):
        mp_, mq = mpmath.mpf(p), mpmath.mpf(q)
        for k in range(n):
            v = mpmath.rgamma(mp_ * k + mq)
            if abs(v) > tiny:
                rg[k] = np.longdouble(mpmath.nstr(v, 25))
    rg.setflags(write=False)
    return rg


def _series_double(
    p: float, q: float, x: np.ndarray, ctl: SeriesControl, extended: bool = False, n: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Compensated Taylor summation in double (or ``long double``) precision
    over at most ``n`` terms (default ``ctl.max_terms``).

    Returns the sums and a mask of entries whose truncation (rigorous tail
    bound) and rounding (``4 eps sum|t_k|``) errors are both within tolerance.
    """
    n = ctl.max_terms if n is None else min(n, ctl.max_terms)
    rg, lrg = _coefficients(p, q, n + 2)
    dtype = np.longdouble if extended else np.float64
    eps = float(np.finfo(dtype).eps)
    if extended:
        rg = _coefficients_extended(p, q, n + 2)
    xd = np.asarray(x, dtype=dtype)
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        lax = np.log(ax)
    neg = ax != x

    def term(k: int) -> tuple[np.ndarray, np.ndarray]:
        # second value: error bound of terms formed through exp(log|t_k|)
        if k == 0:
            return np.full(xd.shape, rg[0], dtype=dtype), np.zeros(xd.shape)
        lmag = k * lax + lrg[k]
        with np.errstate(over="ignore", invalid="ignore"):
            direct = np.power(xd, k) * rg[k]
        fast = np.isfinite(direct) & (np.abs(k * lax) < 690.0) & (p * k + q < 170.0)
        mag = np.exp(np.minimum(lmag, 700.0))
        slow = mag * np.where(neg & (k % 2 == 1), -1.0, 1.0)
        with np.errstate(over="ignore"):
            err = np.where(fast, 0.0, 4.0 * _EPS * (np.abs(np.maximum(lmag, -800.0)) + 1.0) * mag)
        return np.where(fast, direct, slow.astype(dtype)), err

    s = np.zeros(xd.shape, dtype=dtype)
    c = np.zeros_like(s)
    sabs = np.zeros_like(s)
    serr = np.zeros(xd.shape)
    active = np.ones(xd.shape, dtype=bool)
    t, terr = term(0)
    for k in range(n):
        tk = np.where(active, t, 0.0)
        serr += np.where(active, terr, 0.0)
        # Neumaier summation
        ssum = s + tk
        c = c + np.where(np.abs(s) >= np.abs(tk), (s - ssum) + tk, (tk - ssum) + s)
        s = ssum
        sabs = sabs + np.abs(tk)
        t, terr = term(k + 1)
        # ratio |t_{j+1}/t_j| is nonincreasing in j (log-convexity of Gamma)
        r = ax * np.exp(lrg[k + 2] - lrg[k + 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = np.where(r < 1.0, np.abs(t).astype(float) / (1.0 - r), np.inf)
        # relative to the partial sum for positive arguments
        scale = np.where(neg, 1.0, np.maximum(1.0, np.abs(s).astype(float)))
        done = active & (bound <= 0.5 * ctl.abs_tol * scale)
        active &= ~done
        if not active.any():
            break
    total = (s + c).astype(float)
    sabs = sabs.astype(float)
    ok = ~active & np.isfinite(total)
    ok &= (4.0 * eps * sabs <= 0.5 * ctl.abs_tol) | (sabs <= 2.0 * np.abs(total))
    ok &= serr <= 0.5 * ctl.abs_tol * np.where(neg, 1.0, np.maximum(1.0, np.abs(total)))
    return total, ok


def _series_profile(
    p: float, q: float, ax: float, tol: float, n: int, relative: bool = False
) -> tuple[float, int | None]:
    """Largest ``ln|t_k|`` and the number of terms after which the terms
    have dropped well below ``tol`` (``None`` if that takes more than ``n``).

    With ``relative`` set the cutoff is ``tol`` times the largest term, which
    is a lower bound for the sum of a positive series.
    """
    lax = math.log(ax)
    peak = -math.inf
    for k in range(n):
        lt = k * lax - ln_gamma(p * k + q)
        if lt > peak:
            peak = lt
        elif lt < math.log(tol) - 5.0 + (max(peak, 0.0) if relative else 0.0):
            return peak, k + 1
    return peak, None


def _series_mp(p: float, q: float, x: float, ctl: SeriesControl, peak: float) -> float:
    import mpmath

    dps = int(20 + max(peak, 0.0) / math.log(10.0))
    with mpmath.workdps(dps):
        mx = mpmath.mpf(x)
        mp, mq = mpmath.mpf(p), mpmath.mpf(q)
        s = mpmath.mpf(0)
        for k in range(ctl.max_terms):
            t = mx**k * mpmath.rgamma(mp * k + mq)
            s += t
            t1 = mx ** (k + 1) * mpmath.rgamma(mp * (k + 1) + mq)
            r = abs(mx) * mpmath.rgamma(mp * (k + 2) + mq) / mpmath.rgamma(mp * (k + 1) + mq)
            scale = max(1, abs(s)) if x > 0 else 1
            if r < 1 and abs(t1) / (1 - r) <= scale * ctl.abs_tol / 2:
                return float(s)
    raise MLConvergenceError(
        f"E_{{{p},{q}}}({x}): series did not converge in {ctl.max_terms} terms"
    )


def _asymptotic_negative(p: float, q: float, x: float, tol: float) -> float | None:
    """Algebraic expansion ``-sum_k x^-k / Gamma(q - pk)`` for ``x << 0``, ``p < 1``.

    Returns ``None`` unless the optimally truncated remainder envelope is
    well below ``tol``.
    """
    lax = math.log(-x)
    s = 0.0
    comp = 0.0
    prev_env = math.inf
    for k in range(1, 500):
        env = math.exp(-k * lax) * _rgamma_envelope(q - p * k)
        if env <= 0.1 * tol:
            return s + comp
        if env > prev_env and k > 1:
            return None
        prev_env = env
        t = -((1.0 / x) ** k) * rgamma(q - p * k)
        ssum = s + t
        comp += (s - ssum) + t if abs(s) >= abs(t) else (t - ssum) + s
        s = ssum
    return None


@lru_cache(maxsize=16)
def _tanh_sinh_rule(level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tanh-sinh rule on [0, 1] with step ``2^-level``: distances of the nodes
    from the left and right ends (both accurate near their end) and weights."""
    h = 2.0**-level
    t = h * np.arange(-int(3.5 / h), int(3.5 / h) + 1)
    v = 0.5 * math.pi * np.sinh(t)
    # 1 - tanh(v) without cancellation, halved for the [0, 1] map
    far = 0.5 / (np.exp(v) * np.cosh(v))
    near = 0.5 / (np.exp(-v) * np.cosh(v))
    w = 0.25 * h * math.pi * np.cosh(t) / np.cosh(v) ** 2
    return near, far, w


def _integral_negative_array(
    p: float, q: float, x: np.ndarray, tol: float
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized double-precision version of :func:`_integral_negative`.

    Tanh-sinh quadrature on sub-intervals split at ``chi = 1`` and around the
    denominator peak; two successive levels give the error estimate. Returns
    the values and a mask of entries that met ``tol``.
    """
    x = np.asarray(x, dtype=float)
    if q >= 1.0 + p:
        inner, ok = _integral_negative_array(p, q - p, x, tol * np.min(np.abs(x)))
        return (inner - rgamma(q - p)) / x, ok

    sa, sb, cp = _sinpi(1.0 - q), _sinpi(1.0 - q + p), math.cos(math.pi * p)
    expo = (1.0 - q) / p
    # exp(-chi^(1/p)) < e^-60 beyond chi_max
    chi_max = 60.0**p
    ax = -x
    width = math.pi * (1.0 - p)
    points = [np.zeros_like(ax), np.full_like(ax, min(1.0, chi_max)), np.full_like(ax, chi_max), ax]
    for scale in (1.0, 4.0, 16.0):
        points += [ax * (1.0 - scale * width), ax * (1.0 + scale * width)]
    cuts = np.sort(np.clip(np.array(points), 0.0, chi_max), axis=0)

    def integrand(chi: np.ndarray) -> np.ndarray:
        den = chi * chi - 2.0 * chi * x * cp + x * x
        with np.errstate(under="ignore", over="ignore"):
            return chi**expo * np.exp(-(chi ** (1.0 / p))) * (chi * sa - x * sb) / den

    def level_sum(level: int) -> np.ndarray:
        near, far, w = _tanh_sinh_rule(level)
        total = np.zeros_like(ax)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            span = hi - lo
            # nodes in the left half measured from lo, right half from hi
            left = near <= far
            chi = np.where(left[:, None], lo + span * near[:, None], hi - span * far[:, None])
            chi = np.maximum(chi, np.finfo(float).tiny)
            total += span * (w @ np.where(span > 0.0, integrand(chi), 0.0))
        return total

    prev = level_sum(3)
    for level in (4, 5, 6):
        cur = level_sum(level)
        err = np.abs(cur - prev)
        if np.all(err <= 0.05 * tol * p * math.pi):
            break
        prev = cur
    value = cur / (p * math.pi)
    ok = np.isfinite(value) & (err / (p * math.pi) <= 0.05 * tol)
    return value, ok


def _integral_negative(p: float, q: float, x: float, ctl: SeriesControl) -> float:
    """Integral representation for ``x < 0`` and ``0 < p < 1`` (Gorenflo,
    Loutchko and Luchko),

    .. math::

        E_{p,q}(x) = \\frac{1}{p\\pi} \\int_0^\\infty \\chi^{(1-q)/p}
            e^{-\\chi^{1/p}}
            \\frac{\\chi \\sin(\\pi(1-q)) - x \\sin(\\pi(1-q+p))}
                 {\\chi^2 - 2 \\chi x \\cos(\\pi p) + x^2} \\, d\\chi,

    valid for ``q < 1 + p``; larger ``q`` is lowered first through
    ``E_{p,q}(x) = (E_{p,q-p}(x) - 1/Gamma(q-p)) / x``.
    """
    import mpmath

    if q >= 1.0 + p:
        inner = _integral_negative(p, q - p, x, ctl)
        return (inner - rgamma(q - p)) / x

    with mpmath.workdps(45):
        mp_, mq, mx = mpmath.mpf(p), mpmath.mpf(q), mpmath.mpf(x)
        sa = mpmath.sinpi(1 - mq)
        sb = mpmath.sinpi(1 - mq + mp_)
        cp = mpmath.cospi(mp_)
        expo = (1 - mq) / mp_

        def smooth(chi):
            num = chi * sa - mx * sb
            den = chi * chi - 2 * chi * mx * cp + mx * mx
            return mpmath.exp(-(chi ** (1 / mp_))) * num / den

        # the denominator peaks at chi = -x with relative width ~ pi (1 - p)
        width = mpmath.pi * (1 - mp_)
        points = {mpmath.mpf(1), mpmath.mpf(2), -mx}
        for scale in (1, 4, 16):
            points.update(-mx * (1 + s * scale * width) for s in (-1, 1))
        head = sorted(c for c in points if 0 < c < 1)
        tail = sorted(c for c in points if c >= 1)

        # chi = s^m absorbs the algebraic factor chi^expo on [0, 1]
        m = 1 / (expo + 1)
        inner = [mpmath.mpf(0)] + [c ** (1 / m) for c in head] + [mpmath.mpf(1)]
        v0, e0 = mpmath.quad(lambda s: m * smooth(s**m), inner, error=True, maxdegree=8)
        v1, e1 = mpmath.quad(
            lambda chi: chi**expo * smooth(chi), tail + [mpmath.inf], error=True, maxdegree=8
        )
        value, err = v0 + v1, e0 + e1
        value /= mp_ * mpmath.pi
        err /= mp_ * mpmath.pi
    if not err <= ctl.abs_tol:
        raise MLConvergenceError(
            f"E_{{{p},{q}}}({x}): quadrature error estimate {float(err):.3e} exceeds tolerance"
        )
    return float(value)


def _ml_scalar(p: float, q: float, x: float, ctl: SeriesControl) -> float:
    if x == 0.0:
        return rgamma(q)
    peak, needed = _series_profile(p, q, abs(x), ctl.abs_tol, ctl.max_terms, relative=x > 0.0)
    if needed is not None:
        n = needed + 2
        # skip the double series when cancellation alone would exceed the tolerance
        if x > 0.0 or 4.0 * _EPS * math.exp(min(peak, 700.0)) <= 0.05 * ctl.abs_tol:
            value, ok = _series_double(p, q, np.array([x]), ctl, n=n)
            if ok[0]:
                return float(value[0])
        if _EPS_EXTENDED < _EPS and 4.0 * _EPS_EXTENDED * math.exp(min(peak, 700.0)) <= 0.05 * ctl.abs_tol:
            value, ok = _series_double(p, q, np.array([x]), ctl, extended=True, n=n)
            if ok[0]:
                return float(value[0])
    if x < 0.0 and p < 1.0:
        value = _asymptotic_negative(p, q, x, ctl.abs_tol)
        if value is not None:
            return value
    if x < 0.0 and p < 1.0:
        value, ok = _integral_negative_array(p, q, np.array([x]), ctl.abs_tol)
        if ok[0]:
            return float(value[0])
    if needed is not None:
        return _series_mp(p, q, x, ctl, peak)
    if x < 0.0 and p < 1.0:
        return _integral_negative(p, q, x, ctl)
    raise MLConvergenceError(
        f"E_{{{p},{q}}}({x}) needs more than {ctl.max_terms} series terms"
    )


def ml_two(p: float, q: float, arg: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Two-parameter Mittag-Leffler function ``E_{p,q}(arg)``.

    Requires ``p`` in (0, 2], ``q > 0`` and ``|arg| <= 50``. The absolute
    error is at most ``ctl.abs_tol`` (relative to ``max(1, |E|)`` for large
    positive arguments, where the value itself is large).
    """
    p, q, arg = float(p), float(q), float(arg)
    _check_ml_args(p, q, arg)
    return _ml_scalar(p, q, arg, ctl)


def ml_one(p: float, arg: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """One-parameter Mittag-Leffler function ``E_p(arg) = E_{p,1}(arg)``."""
    return ml_two(p, 1.0, arg, ctl)


def ml_two_array(
    p: float, q: float, arg: np.ndarray, ctl: SeriesControl = DEFAULT_CONTROL
) -> np.ndarray:
    """Vectorized :func:`ml_two`; entries the fast path cannot certify are
    evaluated one at a time."""
    p, q = float(p), float(q)
    x = np.asarray(arg, dtype=float)
    flat = x.ravel()
    if flat.size == 0:
        return x.copy()
    amax = float(np.max(np.abs(flat)))
    _check_ml_args(p, q, amax)
    # term count needed grows with |x|, so the largest entry sizes the tables
    _, needed = _series_profile(p, q, amax, ctl.abs_tol, ctl.max_terms, relative=bool(np.all(flat >= 0))) if amax > 0 else (0.0, 1)
    n = None if needed is None else needed + 2
    value, ok = _series_double(p, q, flat, ctl, n=n)
    if not ok.all() and _EPS_EXTENDED < _EPS:
        retry = np.nonzero(~ok)[0]
        value[retry], ok[retry] = _series_double(p, q, flat[retry], ctl, extended=True, n=n)
    retry = np.nonzero(~ok & (flat < 0.0))[0]
    if retry.size and p < 1.0:
        value[retry], ok[retry] = _integral_negative_array(p, q, flat[retry], ctl.abs_tol)
    for idx in np.nonzero(~ok)[0]:
        value[idx] = _ml_scalar(p, q, float(flat[idx]), ctl)
    zero = flat == 0.0
    value[zero] = rgamma(q)
    return value.reshape(x.shape)


# }}}
