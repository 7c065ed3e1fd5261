"""Command-line front end (``phifde``).

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure,
4 failed hypothesis check (seeds are not lower/upper solutions).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as config_mod
from .bounds import BoundInputs, a_priori_estimate, dependence_coefficient, f_star
from .config import ConfigError, RunConfig
from .expr import ParseError, evaluate, parse, variables
from .solver import HypothesisError, IterationReport, LinearForcing, run_extremal, solve_linear
from .special import MLConvergenceError, ml_two

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_HYPOTHESIS = 4

# reference error norms E_0.. for the bundled examples
REFERENCE_ERRORS = {
    "example1": (2.33333, 7.46215e-6, 2.0401e-11, 4.01309e-17),
    "example2": (0.33333, 4.22221e-3, 5.94414e-5, 5.98584e-7, 4.38003e-9),
}
# iterations shown in the figure panels of each example
FIGURE_ITERATIONS = {"example1": (0, 1, 2), "example2": (0, 2, 4)}
COARSE_INTERVALS = 5
FINE_INTERVALS = 400


class UsageError(Exception):
    pass


# {{{ output helpers


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, str)) else _fmt(v) for v in row])


def _write_text(path: Path, lines: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _threads() -> int | None:
    raw = os.environ.get("PHIFDE_THREADS")
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise UsageError(f"PHIFDE_THREADS must be a positive integer, got {raw!r}")
    return value


def _out_dir(args: argparse.Namespace, cfg: RunConfig | None, default: str = "out") -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(cfg.output_dir if cfg is not None else default)


def _write_iterations(out: Path, report: IterationReport) -> list[Path]:
    grid = report.lower.grid
    _write_csv(
        out / "iterates.csv",
        ("n", "t", "lower", "upper"),
        (
            (n, t, lo, hi)
            for n, (low, up) in enumerate(zip(report.lower_iterates, report.upper_iterates))
            for t, lo, hi in zip(grid.nodes, low.values, up.values)
        ),
    )
    _write_csv(out / "errors.csv", ("n", "E_n"), enumerate(report.error_norms))
    return [out / "iterates.csv", out / "errors.csv"]


def _summary_lines(report: IterationReport) -> list[str]:
    lines = [
        f"converged={'true' if report.converged else 'false'}",
        f"iterations={report.iterations_used}",
        f"final_E={_fmt(report.error_norms[-1])}",
        f"unique_within_tolerance={'true' if report.unique else 'false'}",
        f"forced={'true' if report.forced else 'false'}",
    ]
    for c in report.checks:
        lines.append(
            f"{c.kind}_seed_check={'pass' if c.ok else 'fail'} "
            f"worst_residual={_fmt(c.worst_residual)} slack={c.slack:g}"
        )
    lines.extend(f"warning: {w}" for w in report.warnings)
    return lines


# }}}


# {{{ commands


def cmd_solve_linear(args: argparse.Namespace, cfg: RunConfig) -> int:
    try:
        forcing = parse(args.forcing)
    except ParseError as exc:
        raise ConfigError(f"{exc.message} at offset {exc.position}", "--forcing", exc.position) from None
    if variables(forcing) - {"t"}:
        raise ConfigError("forcing may only reference t", "--forcing")
    p = cfg.problem()
    scfg = cfg.solver_config(_threads())
    z = solve_linear(p, LinearForcing(forcing), scfg)
    out = _out_dir(args, cfg)
    _write_csv(out / "solution.csv", ("t", "z"), zip(scfg.grid.nodes, z.values))
    print(f"wrote {out / 'solution.csv'}")
    if args.verify:
        if variables(forcing):
            raise ConfigError("--verify needs a constant forcing", "--forcing")
        c = evaluate(forcing)
        u = p.phi.values(scfg.grid.nodes)
        s = u - u[0]
        beta = p.mu - p.kappa
        exact = np.array(
            [p.z_a + c * x**p.mu * ml_two(beta, p.mu + 1.0, -p.omega * x**beta, scfg.ml_control) for x in s]
        )
        print(f"max_deviation={_fmt(np.max(np.abs(exact - z.values)))}")
    return EXIT_OK


def cmd_extremal(args: argparse.Namespace, cfg: RunConfig) -> int:
    p = cfg.problem()
    scfg = cfg.solver_config(_threads())
    out = _out_dir(args, cfg)
    report = run_extremal(p, parse(cfg.lower), parse(cfg.upper), scfg, force=args.force)
    _write_iterations(out, report)
    _write_text(out / "summary.txt", _summary_lines(report))
    print(f"converged={'true' if report.converged else 'false'} iterations={report.iterations_used} "
          f"final_E={_fmt(report.error_norms[-1])}")
    return EXIT_OK


def cmd_bounds(args: argparse.Namespace, cfg: RunConfig) -> int:
    if cfg.lipschitz_L is None:
        raise ConfigError("lipschitz_L is required for bounds", "bounds.lipschitz_L")
    p = cfg.problem()
    scfg = cfg.solver_config(_threads())
    lip = cfg.value("lipschitz_L")
    fs = cfg.value("f_star") if cfg.f_star is not None else f_star(p.rhs, scfg.grid)
    inputs = BoundInputs(lipschitz_L=lip, f_star=fs)
    coefficient = dependence_coefficient(p, lip)
    report = run_extremal(p, parse(cfg.lower), parse(cfg.upper), scfg, force=True)
    sup = float(max(np.max(np.abs(report.lower.values)), np.max(np.abs(report.upper.values))))
    rows = [
        ("lipschitz_L", lip),
        ("f_star", fs),
        ("a_priori_corrected", a_priori_estimate(p, inputs, corrected=True)),
        ("a_priori_as_printed", a_priori_estimate(p, inputs, corrected=False)),
        ("dependence_coefficient", coefficient),
        ("observed_sup_norm", sup),
    ]
    if args.delta is not None:
        if not args.delta >= 0:
            raise UsageError("--delta must be nonnegative")
        rows.append(("delta", args.delta))
        rows.append(("dependence_bound", coefficient * args.delta))
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key:<{width}}  {_fmt(value)}")
    return EXIT_OK


def _reproduce_run(cfg: RunConfig, n: int, scheme: str) -> tuple[IterationReport, float]:
    cfg = replace(cfg, n_intervals=n, scheme=scheme)
    p = cfg.problem()
    scfg = cfg.solver_config(_threads())
    start = time.perf_counter()
    report = run_extremal(p, parse(cfg.lower), parse(cfg.upper), scfg)
    return report, time.perf_counter() - start


def cmd_reproduce(args: argparse.Namespace, cfg: RunConfig) -> int:
    name = args.example
    out = _out_dir(args, None, default=f"out/{name}")
    coarse, t_coarse = _reproduce_run(cfg, COARSE_INTERVALS, "simpson_desingularized")
    fine, t_fine = _reproduce_run(cfg, FINE_INTERVALS, "product_trapezoid")

    files = []
    for tag, report in (("h0.2_simpson", coarse), (f"n{FINE_INTERVALS}_trapezoid", fine)):
        path = out / f"errors_{tag}.csv"
        _write_csv(path, ("n", "E_n"), enumerate(report.error_norms))
        files.append(path)
    grid = fine.lower.grid
    for n in FIGURE_ITERATIONS[name]:
        if n >= len(fine.lower_iterates):
            continue
        path = out / f"fig_iterates_n{n}.csv"
        _write_csv(
            path,
            ("t", "lower", "upper"),
            zip(grid.nodes, fine.lower_iterates[n].values, fine.upper_iterates[n].values),
        )
        files.append(path)

    ref = REFERENCE_ERRORS[name]
    lines = _summary_lines(fine)
    lines.append(f"runtime_seconds coarse={t_coarse:.3f} fine={t_fine:.3f}")
    lines.append("n,E_n(h=0.2 simpson),E_n(N=400 trapezoid),reference,log10(fine/reference)")
    for n, r in enumerate(ref):
        c = coarse.error_norms[n] if n < len(coarse.error_norms) else math.nan
        f = fine.error_norms[n] if n < len(fine.error_norms) else math.nan
        ratio = math.log10(f / r) if f > 0 else math.nan
        lines.append(f"{n},{c:.6e},{f:.6e},{r:.6e},{ratio:+.3f}")
    _write_text(out / "summary.txt", lines)
    files.append(out / "summary.txt")
    for path in files:
        print(f"wrote {path}")
    return EXIT_OK


# }}}


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument(
        "--dump-config",
        action="store_true",
        default=argparse.SUPPRESS,
        help="print the effective configuration and exit",
    )

    parser = argparse.ArgumentParser(
        prog="phifde",
        description="Two-term Phi-Caputo fractional initial value problems.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-linear", parents=[common], help="solve with a forcing H(t)")
    p.add_argument("config")
    p.add_argument("--forcing", required=True, help="expression in t")
    p.add_argument("--verify", action="store_true", help="compare a constant forcing with its closed form")

    p = sub.add_parser("extremal", parents=[common], help="monotone iteration from the seeds")
    p.add_argument("config")
    p.add_argument("--force", action="store_true", help="continue when seed checks fail")

    p = sub.add_parser("bounds", parents=[common], help="a-priori and dependence bounds")
    p.add_argument("config")
    p.add_argument("--delta", type=float, default=None, help="initial value perturbation")

    p = sub.add_parser("reproduce", parents=[common], help="rerun a bundled example")
    p.add_argument("example", choices=config_mod.BUNDLED)
    return parser


_COMMANDS = {
    "solve-linear": cmd_solve_linear,
    "extremal": cmd_extremal,
    "bounds": cmd_bounds,
    "reproduce": cmd_reproduce,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            cfg = config_mod.bundled(args.example)
        else:
            cfg = config_mod.load(args.config)
        if getattr(args, "dump_config", False):
            sys.stdout.write(config_mod.dump(cfg))
            return EXIT_OK
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"phifde: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HypothesisError as exc:
        print(f"phifde: hypothesis check failed: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ArithmeticError, MLConvergenceError) as exc:
        print(f"phifde: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining validation errors come from the problem data
        print(f"phifde: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
