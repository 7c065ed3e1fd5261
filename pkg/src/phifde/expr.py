"""Parser and evaluator for the scalar function mini-language.

Users describe ``Phi(t)``, its derivative, right-hand sides ``F(t, z)``,
forcing terms ``H(t)`` and iteration seeds as short textual expressions::

    >>> e = parse("(sigmoid(t) - 0.5) * exp(z - 3)")
    >>> evaluate(e, t=0.0, z=3.0)
    0.0

Grammar (``^`` binds tighter than unary minus, and is right-associative)::

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | 't' | 'z' | 'pi' | ident '(' expr ')' | '(' expr ')'

``gamma(...)`` only accepts constant arguments and is folded to a number
while parsing.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Unary",
    "Binary",
    "ParseError",
    "EvalError",
    "DomainError",
    "UnboundVariableError",
    "parse",
    "evaluate",
    "to_text",
    "variables",
    "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "exp", "ln", "abs", "sqrt", "sigmoid", "gamma")
VARIABLES = ("t", "z")


class ParseError(ValueError):
    """Syntax error; ``position`` is the character offset of the offending token."""

    def __init__(self, message: str, position: int, text: str = "") -> None:
        if text:
            position = min(max(position, 0), max(len(text) - 1, 0))
        self.position = position
        self.message = message
        self.text = text
        super().__init__(f"{message} (at offset {position})")


class EvalError(ArithmeticError):
    pass


class DomainError(EvalError):
    pass


class UnboundVariableError(EvalError):
    pass


# {{{ tree


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    arg: Expr


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: Expr
    right: Expr


Expr = Union[Num, Var, Unary, Binary]


def _sigmoid(x: float) -> float:
    if x < -700.0:
        return math.exp(x)
    return 1.0 / (1.0 + math.exp(-x))


def _ln(x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"ln of non-positive value {x!r}")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def _gamma(x: float) -> float:
    from .special import gamma_fn

    if not x > 0.0:
        raise DomainError(f"gamma of non-positive value {x!r}")
    return gamma_fn(x)


_UNARY = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "ln": _ln,
    "abs": abs,
    "sqrt": _sqrt,
    "sigmoid": _sigmoid,
    "gamma": _gamma,
}


def _power(x: float, y: float) -> float:
    if x == 0.0 and y < 0.0:
        raise DomainError("0 raised to a negative power")
    try:
        return math.pow(x, y)
    except ValueError:
        raise DomainError(f"{x!r} ^ {y!r} is not real") from None


def _divide(x: float, y: float) -> float:
    if y == 0.0:
        raise DomainError("division by zero")
    return x / y


_BINARY = {
    "+": lambda x, y: x + y,
    "-": lambda x, y: x - y,
    "*": lambda x, y: x * y,
    "/": _divide,
    "^": _power,
}


def _eval(e: Expr, env: dict[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(f"variable {e.name!r} is not bound") from None
    if isinstance(e, Unary):
        x = _eval(e.arg, env)
        if e.op == "neg":
            return -x
        return _UNARY[e.op](x)
    return _BINARY[e.op](_eval(e.left, env), _eval(e.right, env))


def evaluate(e: Expr, t: float | None = None, z: float | None = None) -> float:
    """Evaluate ``e`` at ``(t, z)``.

    Raises :class:`DomainError` instead of returning a non-finite value and
    :class:`UnboundVariableError` when a referenced variable is not given.
    """
    env = {}
    if t is not None:
        env["t"] = float(t)
    if z is not None:
        env["z"] = float(z)
    try:
        value = _eval(e, env)
    except OverflowError:
        raise DomainError("floating point overflow") from None
    if not math.isfinite(value):
        raise DomainError(f"non-finite result {value!r}")
    return value


def variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


# }}}


# {{{ printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY_PREC = 3
_POWER_PREC = 4
_ATOM_PREC = 5


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC.get(e.op, _POWER_PREC)
    if isinstance(e, Unary) and e.op == "neg":
        return _UNARY_PREC
    return _ATOM_PREC


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_text(e)
    return f"({s})" if _prec(e) < min_prec else s


def to_text(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_text(e)) == e``."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        return f"({s})" if math.copysign(1.0, e.value) < 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(e.arg, _UNARY_PREC)
        return f"{e.op}({to_text(e.arg)})"
    if e.op == "^":
        return f"{_wrap(e.left, _ATOM_PREC)}^{_wrap(e.right, _UNARY_PREC)}"
    p = _PREC[e.op]
    # left-associative: equal precedence on the right needs parentheses
    return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"


# }}}


# {{{ parsing

_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_SYMBOLS = "+-*/^()"


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            tokens.append(_Token("ident", m.group(), i))
            i = m.end()
            continue
        if c in _SYMBOLS:
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", i, text)
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: _Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.pos, self.text)

    def unexpected(self) -> ParseError:
        if self.tok.kind == "end":
            return self.error("unexpected end of input")
        return self.error(f"unexpected {self.tok.text!r}")

    def accept(self, op: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == op:
            self.i += 1
            return True
        return False

    def expect(self, op: str) -> None:
        if not self.accept(op):
            raise self.error(f"expected {op!r}") if self.tok.kind == "end" else self.unexpected()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise self.unexpected()
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            e = Binary(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text == "pi":
                return Num(math.pi)
            if tok.text not in FUNCTIONS:
                raise self.error(f"unknown identifier {tok.text!r}", tok)
            self.expect("(")
            arg_tok = self.tok
            arg = self.expr()
            self.expect(")")
            if tok.text == "gamma":
                return self.fold_gamma(arg, arg_tok)
            return Unary(tok.text, arg)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        raise self.unexpected()

    def fold_gamma(self, arg: Expr, tok: _Token) -> Num:
        if variables(arg):
            raise self.error("gamma() requires a constant argument", tok)
        try:
            return Num(evaluate(Unary("gamma", arg)))
        except EvalError as exc:
            raise self.error(f"gamma(): {exc}", tok) from None


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree; raises :class:`ParseError`."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0, text)
    return _Parser(text).parse()


# }}}
