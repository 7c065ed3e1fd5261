"""INI-style run configuration.

Sections and keys::

    [problem]   mu, kappa, omega, a, b, z0, rhs
    [phi]       builtin = identity | sigmoid      (or expr + expr_prime)
    [seeds]     lower, upper
    [numerics]  n_intervals, scheme, tol, max_iter, ml_abs_tol
    [bounds]    lipschitz_L, f_star               (both optional)
    [output]    dir

Scalar problem values are constant expressions, so ``omega = gamma(1.6)`` or
``omega = 2/sqrt(pi)`` are accepted. Texts are kept verbatim, which makes
:func:`dump` followed by :func:`loads` an exact round trip.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .expr import EvalError, ParseError, evaluate, parse, variables
from .phicalc import Grid, PhiMap
from .solver import ProblemSpec, SolverConfig
from .special import SeriesControl
from .volterra import SCHEMES, QuadratureScheme

__all__ = ["ConfigError", "RunConfig", "load", "loads", "dump", "bundled", "BUNDLED"]

BUNDLED = ("example1", "example2")

_BUILTIN_PHI = {"identity": PhiMap.identity, "sigmoid": PhiMap.sigmoid}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is ``section.name`` when known."""

    def __init__(self, message: str, key: str = "", offset: int | None = None) -> None:
        self.key = key
        self.offset = offset
        where = f"{key}: " if key else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class RunConfig:
    mu: str
    kappa: str
    omega: str
    a: str
    b: str
    z0: str
    rhs: str
    lower: str
    upper: str
    phi_builtin: str | None = "identity"
    phi_expr: str | None = None
    phi_expr_prime: str | None = None
    n_intervals: int = 400
    scheme: str = "product_trapezoid"
    tol: float = 1.0e-12
    max_iter: int = 25
    ml_abs_tol: float = 1.0e-14
    lipschitz_L: str | None = None
    f_star: str | None = None
    output_dir: str = "out"

    def __post_init__(self) -> None:
        # fail early with the offending key named
        self.problem()
        self.solver_config()
        for key, text in (("seeds.lower", self.lower), ("seeds.upper", self.upper)):
            e = _expr(key, text)
            if variables(e) - {"t"}:
                raise ConfigError("seed expressions may only reference t", key)
        for key in ("lipschitz_L", "f_star"):
            text = getattr(self, key)
            if text is not None:
                value = _constant(f"bounds.{key}", text)
                if value < 0:
                    raise ConfigError("must be nonnegative", f"bounds.{key}")

    def value(self, key: str) -> float:
        """Evaluate the constant expression stored in field ``key``."""
        section = "bounds" if key in ("lipschitz_L", "f_star") else "problem"
        return _constant(f"{section}.{key}", getattr(self, key))

    def phi(self) -> PhiMap:
        if self.phi_builtin is not None:
            try:
                return _BUILTIN_PHI[self.phi_builtin]()
            except KeyError:
                raise ConfigError(
                    f"unknown builtin {self.phi_builtin!r}; expected one of {sorted(_BUILTIN_PHI)}",
                    "phi.builtin",
                ) from None
        if self.phi_expr is None or self.phi_expr_prime is None:
            raise ConfigError("need either builtin or both expr and expr_prime", "phi")
        return PhiMap(
            _expr("phi.expr", self.phi_expr), _expr("phi.expr_prime", self.phi_expr_prime), self.phi_expr
        )

    def problem(self) -> ProblemSpec:
        values = {k: self.value(k) for k in ("mu", "kappa", "omega", "a", "b", "z0")}
        rhs = _expr("problem.rhs", self.rhs)
        try:
            return ProblemSpec(
                values["mu"], values["kappa"], values["omega"], values["a"], values["b"],
                values["z0"], rhs, self.phi(),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc), "problem") from None

    def grid(self) -> Grid:
        try:
            return Grid(self.value("a"), self.value("b"), self.n_intervals)
        except ValueError as exc:
            raise ConfigError(str(exc), "numerics.n_intervals") from None

    def solver_config(self, threads: int | None = None) -> SolverConfig:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}", "numerics.scheme")
        try:
            ctl = SeriesControl(abs_tol=self.ml_abs_tol)
        except ValueError as exc:
            raise ConfigError(str(exc), "numerics.ml_abs_tol") from None
        try:
            return SolverConfig(
                self.grid(), QuadratureScheme(self.scheme), self.max_iter, self.tol, ctl, threads
            )
        except ValueError as exc:
            raise ConfigError(str(exc), "numerics") from None


def _expr(key: str, text: str):
    try:
        return parse(text)
    except ParseError as exc:
        raise ConfigError(f"{exc.message} at offset {exc.position} in {text!r}", key, exc.position) from None


def _constant(key: str, text: str) -> float:
    e = _expr(key, text)
    if variables(e):
        raise ConfigError(f"must be a constant expression, got {text!r}", key)
    try:
        return evaluate(e)
    except EvalError as exc:
        raise ConfigError(str(exc), key) from None


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (lipschitz_L)
    return cp


_REQUIRED = {
    "problem": ("mu", "kappa", "omega", "a", "b", "z0", "rhs"),
    "seeds": ("lower", "upper"),
}
_KNOWN = {
    "problem": set(_REQUIRED["problem"]),
    "phi": {"builtin", "expr", "expr_prime"},
    "seeds": set(_REQUIRED["seeds"]),
    "numerics": {"n_intervals", "scheme", "tol", "max_iter", "ml_abs_tol"},
    "bounds": {"lipschitz_L", "f_star"},
    "output": {"dir"},
}


def _number(cp: configparser.ConfigParser, section: str, key: str, kind: type, default):
    if not cp.has_option(section, key):
        return default
    text = cp.get(section, key)
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {text!r}", f"{section}.{key}") from None


def loads(text: str) -> RunConfig:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed file: {exc}") from None
    for section in cp.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown section [{section}]", section)
        for key in cp[section]:
            if key not in _KNOWN[section]:
                raise ConfigError("unknown key", f"{section}.{key}")
    for section, keys in _REQUIRED.items():
        for key in keys:
            if not cp.has_option(section, key):
                raise ConfigError("missing required key", f"{section}.{key}")

    def opt(section: str, key: str) -> str | None:
        return cp.get(section, key) if cp.has_option(section, key) else None

    builtin = opt("phi", "builtin")
    if builtin is None and opt("phi", "expr") is None:
        builtin = "identity"
    return RunConfig(
        **{k: cp.get("problem", k) for k in _REQUIRED["problem"]},
        lower=cp.get("seeds", "lower"),
        upper=cp.get("seeds", "upper"),
        phi_builtin=builtin,
        phi_expr=opt("phi", "expr"),
        phi_expr_prime=opt("phi", "expr_prime"),
        n_intervals=_number(cp, "numerics", "n_intervals", int, 400),
        scheme=opt("numerics", "scheme") or "product_trapezoid",
        tol=_number(cp, "numerics", "tol", float, 1.0e-12),
        max_iter=_number(cp, "numerics", "max_iter", int, 25),
        ml_abs_tol=_number(cp, "numerics", "ml_abs_tol", float, 1.0e-14),
        lipschitz_L=opt("bounds", "lipschitz_L"),
        f_star=opt("bounds", "f_star"),
        output_dir=opt("output", "dir") or "out",
    )


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text)


def dump(cfg: RunConfig) -> str:
    cp = _parser()
    cp["problem"] = {k: getattr(cfg, k) for k in _REQUIRED["problem"]}
    phi = {}
    if cfg.phi_builtin is not None:
        phi["builtin"] = cfg.phi_builtin
    for key, value in (("expr", cfg.phi_expr), ("expr_prime", cfg.phi_expr_prime)):
        if value is not None:
            phi[key] = value
    cp["phi"] = phi
    cp["seeds"] = {"lower": cfg.lower, "upper": cfg.upper}
    cp["numerics"] = {
        "n_intervals": str(cfg.n_intervals),
        "scheme": cfg.scheme,
        "tol": repr(cfg.tol),
        "max_iter": str(cfg.max_iter),
        "ml_abs_tol": repr(cfg.ml_abs_tol),
    }
    cp["bounds"] = {k: v for k in ("lipschitz_L", "f_star") if (v := getattr(cfg, k)) is not None}
    cp["output"] = {"dir": cfg.output_dir}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def bundled(name: str) -> RunConfig:
    """One of the configurations shipped with the package."""
    if name not in BUNDLED:
        raise ConfigError(f"unknown bundled example {name!r}; expected one of {BUNDLED}")
    text = resources.files("phifde").joinpath("data").joinpath(f"{name}.cfg").read_text(encoding="utf-8")
    return loads(text)
