from __future__ import annotations


import numpy as np
import pytest

from phifde.expr import DomainError, parse
from phifde.phicalc import Grid, GridFunction, PhiMap
from phifde.solver import (
    GridMismatchError,
    HypothesisError,
    LinearForcing,
    NodeEvaluationError,
    ProblemSpec,
    SolverConfig,
    check_lower_solution,
    check_upper_solution,
    error_norm,
    iterate_once,
    monotonicity_spot_check,
    run_extremal,
    solve_linear,
    solve_picard,
)
from phifde.special import gamma_fn
from problems import (
    EXAMPLE1_SEEDS,
    EXAMPLE2_SEEDS,
    SEED,
    config,
    constant_forcing_exact,
    example1,
    example2,
    random_lipschitz_problem,
    random_monotone_problem,
)

SLACK = 1e-9


def spec(mu=0.8, kappa=0.5, omega=1.0, z_a=1.0, rhs="0", phi=None) -> ProblemSpec:
    return ProblemSpec(mu, kappa, omega, 0.0, 1.0, z_a, parse(rhs), phi or PhiMap.identity())


def assert_ordered(report, slack=SLACK):
    lows, ups = report.lower_iterates, report.upper_iterates
    for n in range(len(lows) - 1):
        lo, lo1 = lows[n].values, lows[n + 1].values
        up, up1 = ups[n].values, ups[n + 1].values
        assert np.all(lo <= lo1 + slack), n
        assert np.all(lo1 <= up1 + slack), n
        assert np.all(up1 <= up + slack), n


# {{{ types


def test_problem_spec_invariants():
    for kw in ({"mu": 0.5, "kappa": 0.5}, {"mu": 1.2, "kappa": 0.5}, {"kappa": 0.0}, {"omega": 0.0}):
        with pytest.raises(ValueError):
            spec(**kw)
    with pytest.raises(ValueError):
        ProblemSpec(0.8, 0.5, 1.0, 1.0, 1.0, 0.0, parse("0"), PhiMap.identity())
    with pytest.raises(ValueError):
        spec(rhs="x + z")


def test_linear_forcing_only_t():
    with pytest.raises(ValueError):
        LinearForcing(parse("t + z"))


def test_solver_config_invariants():
    grid = Grid(0.0, 1.0, 4)
    for kw in ({"max_iter": 0}, {"tol": 0.0}, {"threads": 0}):
        with pytest.raises(ValueError):
            SolverConfig(grid, **kw)


# }}}


# {{{ linear solver


def test_zero_forcing_is_constant():
    z = solve_linear(spec(z_a=0.7), LinearForcing(parse("0")), config(50))
    assert np.all(z.values == 0.7)


def test_small_omega_recovers_power():
    p = spec(omega=1e-12, z_a=0.3)
    cfg = config(400)
    z = solve_linear(p, LinearForcing(parse(repr(gamma_fn(1.8)))), cfg)
    assert np.max(np.abs(z.values - (0.3 + cfg.grid.nodes**0.8))) <= 2e-3


@pytest.mark.parametrize(
    "mu, kappa, omega", [(0.8, 0.5, 1.0), (0.9, 0.4, gamma_fn(1.6)), (0.6, 0.1, 2.0)]
)
@pytest.mark.parametrize("phi", [PhiMap.identity(), PhiMap.sigmoid()], ids=["identity", "sigmoid"])
def test_constant_forcing_closed_form(mu, kappa, omega, phi):
    p = spec(mu, kappa, omega, z_a=0.25, phi=phi)
    cfg = config(400)
    z = solve_linear(p, LinearForcing(parse("1.5")), cfg)
    exact = constant_forcing_exact(p, 1.5, cfg.grid.nodes)
    assert np.max(np.abs(z.values - exact)) <= 1e-3


def test_simpson_variant_closed_form():
    p = spec(0.9, 0.4, gamma_fn(1.6), z_a=0.0)
    cfg = config(100, "simpson_desingularized")
    z = solve_linear(p, LinearForcing(parse("2")), cfg)
    exact = constant_forcing_exact(p, 2.0, cfg.grid.nodes)
    assert np.max(np.abs(z.values - exact)) <= 2e-2


def test_invalid_phi_rejected():
    p = spec(phi=PhiMap.from_text("t^2", "2*t"))
    with pytest.raises(ValueError, match="weight function"):
        solve_linear(p, LinearForcing(parse("1")), config(10))


def test_node_evaluation_error_names_node():
    p = spec()
    with pytest.raises(NodeEvaluationError) as info:
        solve_linear(p, LinearForcing(parse("ln(t)")), config(10))
    assert info.value.node == 0
    assert isinstance(info.value, DomainError)


def test_grid_mismatch():
    p = ProblemSpec(0.8, 0.5, 1.0, 0.0, 2.0, 0.0, parse("0"), PhiMap.identity())
    with pytest.raises(GridMismatchError):
        solve_linear(p, LinearForcing(parse("1")), config(10))


# }}}


# {{{ single iteration


def test_iterate_zero_rhs():
    p = spec(z_a=0.4)
    cfg = config(30)
    cur = GridFunction(cfg.grid, np.sin(7 * cfg.grid.nodes))
    assert np.all(iterate_once(p, cur, cfg).values == 0.4)


def test_iterate_constant_rhs_small_omega():
    p = spec(omega=1e-12, z_a=1.0, rhs=repr(gamma_fn(1.8)))
    cfg = config(400)
    nxt = iterate_once(p, GridFunction.constant(cfg.grid, 5.0), cfg)
    assert np.max(np.abs(nxt.values - (1.0 + cfg.grid.nodes**0.8))) <= 2e-3


def test_iterate_example1_first_lower_curve():
    p = example1()
    cfg = config(400)
    nxt = iterate_once(p, GridFunction.constant(cfg.grid, 0.0), cfg).values
    assert nxt[0] == 1.0
    assert np.all(np.diff(nxt) >= 0.0)
    assert np.all(nxt >= 1.0) and np.all(nxt <= 1.0 + cfg.grid.nodes)


def test_iterate_grid_mismatch():
    p = spec()
    with pytest.raises(GridMismatchError):
        iterate_once(p, GridFunction.constant(Grid(0.0, 1.0, 8), 0.0), config(10))


def test_linear_consistency_bitwise(rng):
    cfg = config(80)
    for rhs in ("1 + t", "cos(3*t)", "sigmoid(t) - 0.5"):
        p = spec(0.7, 0.3, 1.3, z_a=-0.2, rhs=rhs, phi=PhiMap.sigmoid())
        want = solve_linear(p, LinearForcing(parse(rhs)), cfg).values
        for _ in range(3):
            seed = GridFunction(cfg.grid, rng.normal(size=cfg.grid.n_intervals + 1))
            np.testing.assert_array_equal(iterate_once(p, seed, cfg).values, want)
        report = run_extremal(p, parse("-5"), parse("5 + 10 * t"), cfg, force=True)
        np.testing.assert_array_equal(report.lower_iterates[1].values, want)
        np.testing.assert_array_equal(report.upper_iterates[1].values, want)


def test_threads_are_deterministic():
    p = example2()
    base = iterate_once(p, GridFunction.constant(config(200).grid, 0.5), config(200)).values
    for threads in (2, 4, 7):
        cfg = config(200, threads=threads)
        got = iterate_once(p, GridFunction.constant(cfg.grid, 0.5), cfg).values
        np.testing.assert_array_equal(got, base)


# }}}


# {{{ hypothesis checks


def test_check_examples():
    cfg = config(100)
    p1, p2 = example1(), example2()
    assert check_lower_solution(p1, GridFunction.constant(cfg.grid, 0.0)).ok
    assert check_lower_solution(p2, GridFunction.constant(cfg.grid, 0.5)).ok
    cand = GridFunction.sample(cfg.grid, parse("2 + t"))
    report = check_lower_solution(spec(z_a=2.0), cand)
    assert not report.ok
    assert report.first_violation == 1
    assert report.worst_residual > 0.1
    assert "failed" in report.describe()


def test_check_examples_upper_seeds():
    cfg = config(100)
    assert check_upper_solution(example1(), GridFunction.sample(cfg.grid, parse(EXAMPLE1_SEEDS[1]))).ok
    assert check_upper_solution(example2(), GridFunction.sample(cfg.grid, parse(EXAMPLE2_SEEDS[1]))).ok


def test_check_initial_value():
    cfg = config(20)
    p = spec(z_a=1.0)
    report = check_lower_solution(p, GridFunction.constant(cfg.grid, 1.5))
    assert not report.ok and not report.initial_ok and report.first_violation == 0
    assert check_upper_solution(p, GridFunction.constant(cfg.grid, 1.5)).ok


def test_monotonicity_spot_check():
    cfg = config(20)
    lo, hi = GridFunction.constant(cfg.grid, 0.0), GridFunction.constant(cfg.grid, 4.0)
    assert monotonicity_spot_check(spec(rhs="t * z"), lo, hi) == []
    assert monotonicity_spot_check(spec(rhs="sin(z)"), lo, hi)


# }}}


# {{{ error norm


def test_error_norm_examples():
    g = Grid(0.0, 1.0, 4)
    t = GridFunction.sample(g, parse("t"))
    zero = GridFunction.constant(g, 0.0)
    assert error_norm(zero, zero) == 0.0
    for n in (2, 3, 5, 8):
        grid = Grid(0.0, 1.0, n)
        lo = GridFunction.constant(grid, 0.0)
        assert abs(error_norm(lo, GridFunction.sample(grid, parse("t"))) - 1.0 / 3.0) <= 1e-10
        assert abs(error_norm(lo, GridFunction.sample(grid, parse("1 + t"))) - 7.0 / 3.0) <= 1e-10
    with pytest.raises(GridMismatchError):
        error_norm(t, GridFunction.constant(Grid(0.0, 1.0, 5), 0.0))


# }}}


# {{{ monotone iteration


def test_run_extremal_example1():
    report = run_extremal(example1(), parse("0"), parse("1 + t"), config(400))
    e = report.error_norms
    assert abs(e[0] - 7.0 / 3.0) <= 1e-4
    assert 1e-7 <= e[1] <= 1e-4 and e[2] <= 1e-8 and e[3] <= 1e-10
    assert report.converged and report.unique
    assert_ordered(report)


def test_run_extremal_example2():
    report = run_extremal(example2(), parse("0.5"), parse("0.5 + t"), config(400))
    e = report.error_norms
    assert abs(e[0] - 1.0 / 3.0) <= 1e-4
    assert 4.22e-3 / 5 <= e[1] <= 4.22e-3 * 5
    assert all(b < a for a, b in zip(e[:5], e[1:5]))
    assert e[4] <= 1e-6
    assert_ordered(report)


def test_run_extremal_trivial_fixed_point():
    report = run_extremal(spec(z_a=0.3), parse("0.3"), parse("0.3"), config(16))
    assert report.converged
    assert report.iterations_used == 1
    assert report.error_norms == (0.0, 0.0)


def test_run_extremal_report_shape():
    cfg = config(32, max_iter=3, tol=1e-300)
    report = run_extremal(example2(), parse("0.5"), parse("0.5 + t"), cfg)
    assert len(report.lower_iterates) == len(report.upper_iterates) == len(report.error_norms) == 4
    assert not report.converged
    assert report.iterations_used == 3
    assert all(c.ok for c in report.checks)


def test_run_extremal_rejects_bad_seeds():
    cfg = config(40)
    with pytest.raises(HypothesisError) as info:
        run_extremal(example2(), parse("0.5 + t"), parse("0.5 + t"), cfg)
    assert "lower seed" in str(info.value)
    assert info.value.node is not None
    with pytest.raises(HypothesisError, match="upper seed"):
        run_extremal(example2(), parse("0.5"), parse("0.5"), cfg)
    forced = run_extremal(example2(), parse("0.5 + t"), parse("0.5 + t"), cfg, force=True)
    assert forced.forced and forced.warnings


def test_run_extremal_rejects_unordered_seeds():
    # constants above z_a are upper solutions, constants below are lower ones,
    # for F = 0; ordering fails
    p = spec(z_a=0.0)
    with pytest.raises(HypothesisError, match="seed ordering"):
        run_extremal(p, parse("-t"), parse("-2 * t"), config(20), slack=10.0)


def test_monotone_ordering_random_problems():
    rng = np.random.default_rng(SEED)
    cfg = config(64)
    for _ in range(20):
        p, lo, hi = random_monotone_problem(rng)
        report = run_extremal(p, parse(lo), parse(hi), cfg)
        assert not report.forced
        assert_ordered(report)
        assert all(b <= a + 1e-12 for a, b in zip(report.error_norms, report.error_norms[1:]))
        for f in report.lower_iterates[1:] + report.upper_iterates[1:]:
            assert f.values[0] == p.z_a


def test_continuous_dependence_random_problems():
    from phifde.bounds import dependence_coefficient

    rng = np.random.default_rng(SEED + 1)
    cfg = config(64)
    for _ in range(20):
        p, lip = random_lipschitz_problem(rng)
        base = solve_picard(p, cfg)
        for delta in (1e-2, 1e-1):
            moved = solve_picard(ProblemSpec(**{**p.__dict__, "z_a": p.z_a + delta}), cfg)
            observed = float(np.max(np.abs(moved.values - base.values)))
            assert observed <= dependence_coefficient(p, lip) * delta + 1e-6


def test_picard_matches_extremal_limit():
    # E_n is a squared norm, so tol 1e-24 leaves a gap of order 1e-12
    cfg = config(100, tol=1e-24, max_iter=40)
    report = run_extremal(example2(), parse("0.5"), parse("0.5 + t"), cfg)
    assert report.converged
    z = solve_picard(example2(), cfg)
    assert np.max(np.abs(z.values - report.lower.values)) <= 1e-10
    assert np.max(np.abs(z.values - report.upper.values)) <= 1e-10


def test_picard_reports_non_convergence():
    with pytest.raises(ArithmeticError):
        solve_picard(example2(), config(40), max_iter=2)


# }}}
