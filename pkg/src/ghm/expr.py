"""Arithmetic expressions over coordinates x1..xn with exact symbolic derivatives.

Grammar (infix, precedence pow > unary minus > mul/div > add/sub):

    expr     := term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := '-' factor | power
    power    := atom ['^' exponent]
    atom     := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'
    exponent := ['-'] INT | '(' ['-'] INT ['/' INT] ')'

Coordinates are canonically named x1..xn; callers may declare display
aliases (q1, xi2, ...) that resolve to axes at parse time.  Functions:
sqrt, sin, cos, exp, log.  Exponents are constant integers or rationals,
which keeps differentiation closed over the node set.

Trees are immutable and evaluation is pure, so expressions are safe to
share across threads.  Constructors fold constants and algebraic units
(0 + e, 1 * e, e^1, ...) so derivative trees stay small; no other
rewriting is attempted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

from .errors import EvalDomainError, ParseError

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log")


class Expr:
    """Base node.  Subclasses are frozen dataclasses; compare structurally."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_str(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, slots=True)
class Coord(Expr):
    axis: int  # 1-based


@dataclass(frozen=True, slots=True)
class Param(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    arg: Expr


@dataclass(frozen=True, slots=True)
class Add(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, slots=True)
class Div(Expr):
    a: Expr
    b: Expr


@dataclass(frozen=True, slots=True)
class Pow(Expr):
    base: Expr
    exponent: Fraction  # constant integer or rational


ZERO = Const(0.0)
ONE = Const(1.0)


def is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


# ---------------------------------------------------------------------------
# Folding constructors
# ---------------------------------------------------------------------------

def const(v: float) -> Const:
    return Const(float(v))


def add(a: Expr, b: Expr) -> Expr:
    if is_zero(a):
        return b
    if is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if is_zero(b):
        return a
    if is_zero(a):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return Sub(a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: Expr, b: Expr) -> Expr:
    if is_zero(a) or is_zero(b):
        return ZERO
    if is_one(a):
        return b
    if is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if is_one(b):
        return a
    if is_zero(a) and not is_zero(b):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def powc(base: Expr, exponent: Fraction | int) -> Expr:
    exponent = Fraction(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        try:
            return Const(_pow_value(base.value, exponent))
        except (ValueError, ZeroDivisionError, OverflowError):
            pass
    return Pow(base, exponent)


def call(fn: str, arg: Expr) -> Expr:
    if fn not in FUNCTIONS:
        raise ValueError(f"unknown function {fn!r}")
    if isinstance(arg, Const):
        try:
            return Const(getattr(math, fn)(arg.value))
        except (ValueError, OverflowError):
            pass
    return Call(fn, arg)


def _pow_value(base: float, exponent: Fraction) -> float:
    if exponent.denominator == 1:
        return base ** int(exponent)
    # math.pow raises ValueError on negative base with a fractional
    # exponent; float ** would silently go complex there.
    return math.pow(base, float(exponent))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expr, point: Sequence[float], params: Mapping[str, float] | None = None) -> float:
    """Evaluate at ``point`` (length n, 0-indexed storage for axes 1..n)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Coord):
        return float(point[e.axis - 1])
    if isinstance(e, Param):
        if params is None or e.name not in params:
            raise EvalDomainError(f"unbound parameter {e.name!r}")
        return float(params[e.name])
    if isinstance(e, Neg):
        return -evaluate(e.arg, point, params)
    if isinstance(e, Add):
        return evaluate(e.a, point, params) + evaluate(e.b, point, params)
    if isinstance(e, Sub):
        return evaluate(e.a, point, params) - evaluate(e.b, point, params)
    if isinstance(e, Mul):
        return evaluate(e.a, point, params) * evaluate(e.b, point, params)
    if isinstance(e, Div):
        denom = evaluate(e.b, point, params)
        if denom == 0.0:
            raise EvalDomainError("division by zero", to_str(e))
        return evaluate(e.a, point, params) / denom
    if isinstance(e, Pow):
        base = evaluate(e.base, point, params)
        try:
            return _pow_value(base, e.exponent)
        except (ValueError, ZeroDivisionError) as exc:
            raise EvalDomainError(f"power domain error: {exc}", to_str(e)) from None
    if isinstance(e, Call):
        arg = evaluate(e.arg, point, params)
        if e.fn == "sqrt" and arg < 0.0:
            raise EvalDomainError("sqrt of negative value", to_str(e))
        if e.fn == "log" and arg <= 0.0:
            raise EvalDomainError("log of nonpositive value", to_str(e))
        return getattr(math, e.fn)(arg)
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def differentiate(e: Expr, axis: int) -> Expr:
    """Exact partial derivative with respect to coordinate ``axis`` (1-based)."""
    if isinstance(e, (Const, Param)):
        return ZERO
    if isinstance(e, Coord):
        return ONE if e.axis == axis else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, axis))
    if isinstance(e, Add):
        return add(differentiate(e.a, axis), differentiate(e.b, axis))
    if isinstance(e, Sub):
        return sub(differentiate(e.a, axis), differentiate(e.b, axis))
    if isinstance(e, Mul):
        return add(mul(differentiate(e.a, axis), e.b), mul(e.a, differentiate(e.b, axis)))
    if isinstance(e, Div):
        da, db = differentiate(e.a, axis), differentiate(e.b, axis)
        return div(sub(mul(da, e.b), mul(e.a, db)), powc(e.b, 2))
    if isinstance(e, Pow):
        db = differentiate(e.base, axis)
        coeff = mul(Const(float(e.exponent)), powc(e.base, e.exponent - 1))
        return mul(coeff, db)
    if isinstance(e, Call):
        da = differentiate(e.arg, axis)
        if e.fn == "sqrt":
            return div(da, mul(Const(2.0), call("sqrt", e.arg)))
        if e.fn == "sin":
            return mul(call("cos", e.arg), da)
        if e.fn == "cos":
            return neg(mul(call("sin", e.arg), da))
        if e.fn == "exp":
            return mul(call("exp", e.arg), da)
        if e.fn == "log":
            return div(da, e.arg)
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def substitute(e: Expr, coord_map: Mapping[int, Expr]) -> Expr:
    """Replace coordinates by expressions (used for map composition and restriction)."""
    if isinstance(e, Coord):
        return coord_map.get(e.axis, e)
    if isinstance(e, (Const, Param)):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, coord_map))
    if isinstance(e, Add):
        return add(substitute(e.a, coord_map), substitute(e.b, coord_map))
    if isinstance(e, Sub):
        return sub(substitute(e.a, coord_map), substitute(e.b, coord_map))
    if isinstance(e, Mul):
        return mul(substitute(e.a, coord_map), substitute(e.b, coord_map))
    if isinstance(e, Div):
        return div(substitute(e.a, coord_map), substitute(e.b, coord_map))
    if isinstance(e, Pow):
        return powc(substitute(e.base, coord_map), e.exponent)
    if isinstance(e, Call):
        return call(e.fn, substitute(e.arg, coord_map))
    raise TypeError(f"not an Expr: {e!r}")


def bind_params(e: Expr, values: Mapping[str, float]) -> Expr:
    """Replace parameter leaves by constants."""
    if isinstance(e, Param):
        if e.name not in values:
            raise EvalDomainError(f"unbound parameter {e.name!r}")
        return Const(float(values[e.name]))
    if isinstance(e, (Const, Coord)):
        return e
    if isinstance(e, Neg):
        return neg(bind_params(e.arg, values))
    if isinstance(e, Add):
        return add(bind_params(e.a, values), bind_params(e.b, values))
    if isinstance(e, Sub):
        return sub(bind_params(e.a, values), bind_params(e.b, values))
    if isinstance(e, Mul):
        return mul(bind_params(e.a, values), bind_params(e.b, values))
    if isinstance(e, Div):
        return div(bind_params(e.a, values), bind_params(e.b, values))
    if isinstance(e, Pow):
        return powc(bind_params(e.base, values), e.exponent)
    if isinstance(e, Call):
        return call(e.fn, bind_params(e.arg, values))
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_LVL_ADD, _LVL_MUL, _LVL_UNARY, _LVL_POW, _LVL_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, (Add, Sub)):
        return _LVL_ADD
    if isinstance(e, (Mul, Div)):
        return _LVL_MUL
    if isinstance(e, Neg):
        return _LVL_UNARY
    if isinstance(e, Pow):
        return _LVL_POW
    if isinstance(e, Const) and e.value < 0:
        return _LVL_UNARY
    return _LVL_ATOM


def _wrap(e: Expr, need: int) -> str:
    s = to_str(e)
    return f"({s})" if _prec(e) < need else s


def to_str(e: Expr) -> str:
    """Parseable infix form; ``parse(to_str(e))`` evaluates identically to ``e``."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Coord):
        return f"x{e.axis}"
    if isinstance(e, Param):
        return e.name
    if isinstance(e, Neg):
        return f"-{_wrap(e.arg, _LVL_UNARY)}"
    if isinstance(e, Add):
        return f"{_wrap(e.a, _LVL_ADD)} + {_wrap(e.b, _LVL_MUL)}"
    if isinstance(e, Sub):
        return f"{_wrap(e.a, _LVL_ADD)} - {_wrap(e.b, _LVL_MUL)}"
    if isinstance(e, Mul):
        return f"{_wrap(e.a, _LVL_MUL)}*{_wrap(e.b, _LVL_UNARY)}"
    if isinstance(e, Div):
        return f"{_wrap(e.a, _LVL_MUL)}/{_wrap(e.b, _LVL_UNARY)}"
    if isinstance(e, Pow):
        ex = e.exponent
        estr = str(ex.numerator) if ex.denominator == 1 else f"({ex.numerator}/{ex.denominator})"
        return f"{_wrap(e.base, _LVL_ATOM)}^{estr}"
    if isinstance(e, Call):
        return f"{e.fn}({to_str(e.arg)})"
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Compilation (hot paths: trajectory integration, batch sampling)
# ---------------------------------------------------------------------------

def _source(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Coord):
        return f"x[{e.axis - 1}]"
    if isinstance(e, Param):
        raise EvalDomainError(f"cannot compile unbound parameter {e.name!r}")
    if isinstance(e, Neg):
        return f"(-{_source(e.arg)})"
    if isinstance(e, Add):
        return f"({_source(e.a)}+{_source(e.b)})"
    if isinstance(e, Sub):
        return f"({_source(e.a)}-{_source(e.b)})"
    if isinstance(e, Mul):
        return f"({_source(e.a)}*{_source(e.b)})"
    if isinstance(e, Div):
        return f"({_source(e.a)}/{_source(e.b)})"
    if isinstance(e, Pow):
        ex = e.exponent
        if ex.denominator == 1:
            return f"({_source(e.base)})**({ex.numerator})"
        return f"m.pow({_source(e.base)},{ex.numerator}/{ex.denominator})"
    if isinstance(e, Call):
        return f"m.{e.fn}({_source(e.arg)})"
    raise TypeError(f"not an Expr: {e!r}")


def compile_expr(e: Expr) -> Callable[[Sequence[float]], float]:
    """Compile a parameter-free expression to a plain Python callable."""
    return eval(f"lambda x: {_source(e)}", {"m": math})


def compile_vector(exprs: Iterable[Expr]) -> Callable[[Sequence[float]], tuple]:
    body = ",".join(_source(e) for e in exprs)
    return eval(f"lambda x: ({body},)", {"m": math})


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            off = len(text) - len(stripped)
            raise ParseError(f"unexpected character {text[off]!r}", off)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, params: frozenset[str], aliases: Sequence[str] | None):
        self.text = text
        self.n = n
        self.params = params
        self.alias_map = {}
        if aliases is not None:
            if len(aliases) != n:
                raise ValueError(f"expected {n} aliases, got {len(aliases)}")
            self.alias_map = {name: i + 1 for i, name in enumerate(aliases)}
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, off = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.factor()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            return neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, off = self.peek()
        if kind == "op" and val == "^":
            self.next()
            exponent = self.exponent()
            base = powc(base, exponent)
            kind, val, off = self.peek()
            if kind == "op" and val == "^":
                raise ParseError("chained '^' is not supported; parenthesize", off)
        return base

    def exponent(self) -> Fraction:
        kind, val, off = self.peek()
        negate = False
        if kind == "op" and val == "-":
            self.next()
            negate = True
            kind, val, off = self.peek()
        if kind == "num":
            self.next()
            frac = self._int_fraction(val, off)
            return -frac if negate else frac
        if kind == "op" and val == "(" and not negate:
            self.next()
            inner_neg = False
            kind, val, off = self.peek()
            if kind == "op" and val == "-":
                self.next()
                inner_neg = True
                kind, val, off = self.peek()
            if kind != "num":
                raise ParseError("expected integer in exponent", off)
            self.next()
            num = self._int_fraction(val, off)
            kind, val, off2 = self.peek()
            if kind == "op" and val == "/":
                self.next()
                kind, val, off2 = self.next()
                if kind != "num":
                    raise ParseError("expected integer denominator", off2)
                den = self._int_fraction(val, off2)
                num = num / den
            self.expect_op(")")
            return -num if inner_neg else num
        raise ParseError("exponent must be a constant integer or rational", off)

    @staticmethod
    def _int_fraction(text: str, off: int) -> Fraction:
        value = float(text)
        if value != int(value):
            raise ParseError("exponent must be a constant integer or rational", off)
        return Fraction(int(value))

    def atom(self) -> Expr:
        kind, val, off = self.next()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            if val in FUNCTIONS:
                kind2, val2, off2 = self.peek()
                if kind2 != "op" or val2 != "(":
                    raise ParseError(f"function {val!r} requires parenthesized argument", off2)
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return call(val, arg)
            if val in self.alias_map:
                return Coord(self.alias_map[val])
            m = re.fullmatch(r"x(\d+)", val)
            if m is not None:
                axis = int(m.group(1))
                if 1 <= axis <= self.n:
                    return Coord(axis)
                raise ParseError(f"coordinate {val!r} out of range 1..{self.n}", off)
            if val in self.params:
                return Param(val)
            raise ParseError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ParseError(f"unexpected token {val!r}" if val else "unexpected end of input", off)


def parse(
    text: str,
    n: int,
    params: Iterable[str] = (),
    aliases: Sequence[str] | None = None,
) -> Expr:
    """Parse ``text`` over coordinates x1..xn (plus aliases) and parameter names."""
    return _Parser(text, n, frozenset(params), aliases).parse()


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarField:
    """An expression over a fixed n-dimensional chart, with exact gradient."""

    n: int
    expression: Expr
    name: str = ""

    @classmethod
    def from_text(cls, text: str, n: int, params: Mapping[str, float] | None = None,
                  aliases: Sequence[str] | None = None, name: str = "") -> "ScalarField":
        e = parse(text, n, params=(params or {}).keys(), aliases=aliases)
        if params:
            e = bind_params(e, params)
        return cls(n, e, name)

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self.expression, point)

    @cached_property
    def grad(self) -> tuple[Expr, ...]:
        return tuple(differentiate(self.expression, i) for i in range(1, self.n + 1))

    def partial(self, axis: int) -> Expr:
        return self.grad[axis - 1]

    def gradient(self, point: Sequence[float]) -> list[float]:
        return [evaluate(g, point) for g in self.grad]

    @cached_property
    def compiled(self) -> Callable[[Sequence[float]], float]:
        return compile_expr(self.expression)

    def is_constant_zero(self) -> bool:
        return is_zero(self.expression)


def constant_field(n: int, value: float, name: str = "") -> ScalarField:
    return ScalarField(n, Const(float(value)), name)
