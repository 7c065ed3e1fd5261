from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from phifde.bounds import (
    BoundInputs,
    a_priori_estimate,
    comparison_check,
    continuous_dependence_bound,
    dependence_coefficient,
    f_star,
    gronwall_envelope,
)
from phifde.expr import parse
from phifde.phicalc import Grid, GridFunction, PhiMap
from phifde.solver import LinearForcing, run_extremal, solve_picard
from phifde.special import gamma_fn, ml_one
from problems import (
    SEED,
    config,
    example1,
    example2,
    ml_mp,
    random_lipschitz_problem,
    random_nonnegative_forcing,
    random_orders,
)

IDENTITY = PhiMap.identity()
SIGMOID = PhiMap.sigmoid()


def gronwall_series(v, w: float, mu: float, phi_fn, dphi_fn, ell: float, terms: int = 60) -> float:
    """``v(l) + sum_k (w Gamma(mu))^k / Gamma(k mu) int_0^l Phi' (Phi(l) - Phi(r))^(k mu - 1) v(r) dr``."""
    with mpmath.workdps(30):
        total = mpmath.mpf(v(ell))
        top = phi_fn(ell)
        for k in range(1, terms):
            c = (w * mpmath.gamma(mu)) ** k / mpmath.gamma(k * mu)
            integral = mpmath.quad(
                lambda r: dphi_fn(r) * abs(top - phi_fn(r)) ** (k * mu - 1) * v(r), [0, ell]
            )
            term = c * integral
            total += term
            if abs(term) < mpmath.mpf(10) ** -25:
                break
        return float(total)


# {{{ inputs


def test_bound_inputs_nonnegative():
    BoundInputs(1.0, 0.0, 0.0, 0.5)
    for kw in ({"lipschitz_L": -1.0}, {"f_star": -0.1}, {"monotone_M": math.nan}, {"delta_z_a": -1e-9}):
        with pytest.raises(ValueError):
            BoundInputs(**kw)


# }}}


# {{{ gronwall


def test_gronwall_examples():
    grid = Grid(0.0, 1.0, 20)
    v = GridFunction.sample(grid, parse("1 + t^2"))
    assert np.array_equal(gronwall_envelope(v, 0.0, 0.7, SIGMOID).values, v.values)
    ones = GridFunction.constant(grid, 1.0)
    for mu in (0.4, 0.9, 1.0):
        got = gronwall_envelope(ones, 1.0 / gamma_fn(mu), mu, IDENTITY).values
        want = [ml_mp(mu, 1.0, t**mu) for t in grid.nodes]
        np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-14)
    c = GridFunction.constant(grid, 2.5)
    u = SIGMOID.values(grid.nodes)
    got = gronwall_envelope(c, 0.3, 0.6, SIGMOID).values
    want = [2.5 * ml_mp(0.6, 1.0, gamma_fn(0.6) * 0.3 * (x - u[0]) ** 0.6) for x in u]
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_gronwall_rejects_decreasing_v():
    grid = Grid(0.0, 1.0, 10)
    with pytest.raises(ValueError, match="nondecreasing"):
        gronwall_envelope(GridFunction.sample(grid, parse("1 - t")), 1.0, 0.5, IDENTITY)
    with pytest.raises(ValueError):
        gronwall_envelope(GridFunction.constant(grid, 1.0), -1.0, 0.5, IDENTITY)
    with pytest.raises(ValueError):
        gronwall_envelope(GridFunction.constant(grid, 1.0), 1.0, 1.5, IDENTITY)


@pytest.mark.parametrize("mu, w", [(0.5, 0.8), (0.8, 2.0)])
def test_gronwall_matches_series_form_for_constant_v(mu, w):
    grid = Grid(0.0, 1.0, 4)
    got = gronwall_envelope(GridFunction.constant(grid, 1.5), w, mu, SIGMOID).values
    sig = lambda r: 1 / (1 + mpmath.exp(-r))  # noqa: E731
    dsig = lambda r: sig(r) * (1 - sig(r))  # noqa: E731
    for t, g in zip(grid.nodes[1:], got[1:]):
        want = gronwall_series(lambda r: 1.5, w, mu, sig, dsig, float(t))
        assert g == pytest.approx(want, rel=1e-10)


def test_gronwall_dominates_series_form_for_increasing_v():
    grid = Grid(0.0, 1.0, 4)
    v = lambda r: 1 + r**2  # noqa: E731
    got = gronwall_envelope(GridFunction.sample(grid, parse("1 + t^2")), 1.2, 0.6, IDENTITY).values
    for t, g in zip(grid.nodes[1:], got[1:]):
        assert g >= gronwall_series(v, 1.2, 0.6, lambda r: r, lambda r: 1, float(t)) - 1e-12


def test_gronwall_dominates_input(rng):
    grid = Grid(0.0, 1.0, 30)
    for _ in range(20):
        v = GridFunction(grid, np.cumsum(rng.uniform(0, 1, grid.n_intervals + 1)))
        out = gronwall_envelope(v, float(rng.uniform(0, 1)), float(rng.uniform(0.3, 1.0)), SIGMOID)
        assert np.all(out.values >= v.values)


# }}}


# {{{ a-priori and dependence bounds


def test_a_priori_examples():
    p = example2()
    assert a_priori_estimate(p, BoundInputs(lipschitz_L=1.0, f_star=0.0)) == pytest.approx(
        0.5 * ml_mp(0.9, 1.0, 1.0), rel=1e-14
    )
    tiny = a_priori_estimate(p, BoundInputs(lipschitz_L=1e-12, f_star=0.0))
    assert tiny == pytest.approx(0.5, rel=1e-11)
    inputs = BoundInputs(lipschitz_L=2.0, f_star=0.3)
    corrected = a_priori_estimate(p, inputs, corrected=True)
    printed = a_priori_estimate(p, inputs, corrected=False)
    e = ml_mp(0.9, 1.0, 2.0)
    assert corrected == pytest.approx((0.5 + 0.3 / gamma_fn(1.9)) * e, rel=1e-13)
    assert printed == pytest.approx((0.5 + 0.6 / gamma_fn(1.9)) * e, rel=1e-13)


def test_a_priori_contains_example2_solution():
    report = run_extremal(example2(), parse("0.5"), parse("0.5 + t"), config(200))
    bound = a_priori_estimate(example2(), BoundInputs(lipschitz_L=1.0, f_star=0.0))
    assert np.max(np.abs(report.upper.values)) <= bound


def test_a_priori_contains_random_solutions():
    rng = np.random.default_rng(SEED + 2)
    cfg = config(64)
    for _ in range(20):
        p, lip = random_lipschitz_problem(rng)
        z = solve_picard(p, cfg)
        inputs = BoundInputs(lipschitz_L=lip, f_star=f_star(p.rhs, cfg.grid))
        assert np.max(np.abs(z.values)) <= a_priori_estimate(p, inputs) + 1e-6


def test_dependence_examples():
    p = example2()
    assert continuous_dependence_bound(p, BoundInputs(lipschitz_L=1.0, delta_z_a=0.0)) == 0.0
    assert continuous_dependence_bound(p, BoundInputs(lipschitz_L=1.0, delta_z_a=0.1)) == pytest.approx(
        0.1 * ml_mp(0.9, 1.0, 1.0), rel=1e-14
    )
    assert continuous_dependence_bound(p, BoundInputs(lipschitz_L=1e-12, delta_z_a=0.1)) == pytest.approx(
        0.1, rel=1e-11
    )
    assert dependence_coefficient(example1(), 0.5) == pytest.approx(
        ml_one(0.8, 0.5 * (1 / (1 + math.exp(-1)) - 0.5) ** 0.8), rel=1e-15
    )


def test_dependence_homogeneous(rng):
    p = example1()
    for _ in range(50):
        lip, delta = float(rng.uniform(0, 3)), float(rng.uniform(0, 1))
        one = continuous_dependence_bound(p, BoundInputs(lipschitz_L=lip, delta_z_a=delta))
        two = continuous_dependence_bound(p, BoundInputs(lipschitz_L=lip, delta_z_a=2 * delta))
        assert two == 2 * one


def test_f_star_is_nodewise_max():
    grid = Grid(0.0, 1.0, 10)
    assert f_star(parse("t * sin(z)"), grid) == 0.0
    assert f_star(parse("cos(3 * t) + z"), grid) == pytest.approx(1.0)
    assert f_star(parse("t - 2 + z^2"), grid) == pytest.approx(2.0)


# }}}


# {{{ comparison principle


def test_comparison_examples():
    cfg = config(100)
    rep = comparison_check(0.8, 0.5, 1.0, IDENTITY, LinearForcing(parse("0")), 1.0, cfg)
    assert rep.ok and np.all(rep.solution.values == 1.0)
    p = example1()
    rep = comparison_check(p.mu, p.kappa, p.omega, p.phi, LinearForcing(parse("1")), 0.0, cfg)
    assert rep.ok and rep.min_value >= 0.0 and rep.argmin_node == 0


def test_comparison_preconditions():
    cfg = config(20)
    with pytest.raises(ValueError, match="negative at node"):
        comparison_check(0.8, 0.5, 1.0, IDENTITY, LinearForcing(parse("t - 0.5")), 0.0, cfg)
    with pytest.raises(ValueError):
        comparison_check(0.8, 0.5, 1.0, IDENTITY, LinearForcing(parse("1")), -0.1, cfg)


def test_comparison_randomized():
    rng = np.random.default_rng(SEED + 3)
    cfg = config(48)
    lowest = math.inf
    for _ in range(100):
        mu, kappa, omega = random_orders(rng)
        phi = IDENTITY if rng.uniform() < 0.5 else SIGMOID
        gamma_a = float(rng.choice([0.0, rng.uniform(0, 2)]))
        rep = comparison_check(
            mu, kappa, omega, phi, LinearForcing(parse(random_nonnegative_forcing(rng))), gamma_a, cfg
        )
        lowest = min(lowest, rep.min_value)
        assert rep.ok
    assert lowest >= -1e-9


# }}}
