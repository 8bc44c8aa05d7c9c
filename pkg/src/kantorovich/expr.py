"""A tiny expression language for target fields ``f(x, y_1, ..., y_d)``.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := base ("^" integer)? | "-" factor
    base   := number | ident | func "(" expr ")" | "(" expr ")"
    ident  := "x" | "y" | "y1" .. "y9"
    func   := "sin" | "cos" | "exp"

Variable 0 is ``x``; variable ``i`` is ``y_i``. For ``d = 1``, ``y`` is an alias
of ``y1``. Expressions are immutable and hashable, which lets evaluation share
repeated subtrees. New functions go in ``FUNCTIONS`` together with a rule in
``_differentiate_call``.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from itertools import product
from typing import Union

import numpy as np


class ExprError(ValueError):
    """Base class for parse errors; ``offset`` is the byte offset in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


class VariableIndexError(ExprError):
    pass


class FieldEvaluationWarning(RuntimeWarning):
    """Non-finite value (division by zero, overflow, ...) replaced by NaN."""


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Const, Var, Neg, BinOp, Pow, Call]

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

ZERO = Const(0.0)
ONE = Const(1.0)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    end = len(text)
    while pos < end:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", _byte(text, bad))
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, d: int):
        self.text = text
        self.d = d
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None, cls=ExprSyntaxError):
        tok = tok or self.peek()
        return cls(message, _byte(self.text, tok[2]))

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "end":
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise self.error(f"expected {value!r}, found {found}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.factor())
        node = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            if tok[0] != "number" or not tok[1].isdigit():
                raise self.error("expected a non-negative integer exponent")
            self.take()
            node = Pow(node, int(tok[1]))
        return node

    def base(self):
        tok = self.peek()
        kind, value, _ = tok
        if kind == "number":
            self.take()
            return Const(float(value))
        if kind == "name":
            self.take()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            return Var(self._variable(value, tok))
        if kind == "op" and value == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise self.error(f"expected a number, variable, function or '(', found {found}")

    def _variable(self, name, tok):
        if name == "x":
            return 0
        if name == "y":
            if self.d == 1:
                return 1
            raise self.error("'y' is ambiguous for d > 1; use y1..y9", tok, UnknownIdentifierError)
        m = re.fullmatch(r"y([1-9])", name)
        if m is None:
            raise self.error(f"unknown identifier {name!r}", tok, UnknownIdentifierError)
        index = int(m.group(1))
        if index > self.d:
            raise self.error(f"variable {name!r} out of range for d={self.d}", tok,
                             VariableIndexError)
        return index


def parse(text: str, d: int = 1) -> Expr:
    """Parse ``text`` into an expression over ``x, y_1..y_d``."""
    if d < 1:
        raise ValueError("dimension d must be at least 1")
    return _Parser(text, d).parse()


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    if isinstance(e, Const) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return 5


def to_string(e: Expr, d: int = 1) -> str:
    """Render ``e`` so that ``parse(to_string(e))`` rebuilds the same tree shape."""
    if isinstance(e, Const):
        if e.value < 0 or math.copysign(1.0, e.value) < 0:
            return "-" + repr(-e.value)
        return repr(e.value)
    if isinstance(e, Var):
        if e.index == 0:
            return "x"
        return "y" if d == 1 else f"y{e.index}"
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg, d)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg, d)
        return "-" + (inner if _prec(e.arg) >= 3 else f"({inner})")
    if isinstance(e, Pow):
        inner = to_string(e.base, d)
        if _prec(e.base) < 5:
            inner = f"({inner})"
        return f"{inner}^{e.exponent}"
    left = to_string(e.left, d)
    right = to_string(e.right, d)
    p = _PREC[e.op]
    if _prec(e.left) < p:
        left = f"({left})"
    # left-associative: equal precedence on the right needs parentheses
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------- simplification

def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return BinOp("*", a, b)


def div(a, b):
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return BinOp("/", a, b)


def power(a, n: int):
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a):
        return Const(a.value ** n)
    return Pow(a, n)


# ---------------------------------------------------------------- differentiation

def _differentiate_call(e: Call, da):
    if e.func == "sin":
        return mul(Call("cos", e.arg), da)
    if e.func == "cos":
        return mul(neg(Call("sin", e.arg)), da)
    if e.func == "exp":
        return mul(e, da)
    raise ValueError(f"no derivative rule for {e.func}")


def differentiate(e: Expr, var: int) -> Expr:
    """Symbolic partial derivative with respect to variable ``var``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == var else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var))
    if isinstance(e, Call):
        da = differentiate(e.arg, var)
        return ZERO if _is_const(da, 0.0) else _differentiate_call(e, da)
    if isinstance(e, Pow):
        db = differentiate(e.base, var)
        if _is_const(db, 0.0):
            return ZERO
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), db)
    da = differentiate(e.left, var)
    db = differentiate(e.right, var)
    if e.op == "+":
        return add(da, db)
    if e.op == "-":
        return sub(da, db)
    if e.op == "*":
        return add(mul(da, e.right), mul(e.left, db))
    # quotient rule
    if _is_const(db, 0.0):
        return div(da, e.right)
    return div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2))


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    return variables(e.left) | variables(e.right)


# ---------------------------------------------------------------- evaluation

def _eval(e, point, memo):
    # identity keys: structural hashing of deep trees is quadratic
    key = id(e)
    hit = memo.get(key)
    if hit is not None:
        return hit
    if isinstance(e, Const):
        out = e.value
    elif isinstance(e, Var):
        out = point[e.index]
    elif isinstance(e, Neg):
        out = -_eval(e.arg, point, memo)
    elif isinstance(e, Call):
        out = FUNCTIONS[e.func](_eval(e.arg, point, memo))
    elif isinstance(e, Pow):
        out = np.power(_eval(e.base, point, memo), float(e.exponent))
    else:
        a = _eval(e.left, point, memo)
        b = _eval(e.right, point, memo)
        if e.op == "+":
            out = a + b
        elif e.op == "-":
            out = a - b
        elif e.op == "*":
            out = a * b
        else:
            out = a / b
    memo[key] = out
    return out


def _real(c) -> np.ndarray:
    # float64 unless the caller already works in extended precision
    c = np.asarray(c)
    return c.astype(np.result_type(c.dtype, np.float64), copy=False)


def evaluate(e: Expr, point):
    """Evaluate ``e`` at ``point = (x, y_1, ..., y_d)``.

    Coordinates may be scalars or broadcastable arrays; ``np.longdouble``
    input is evaluated in that precision, anything else in float64. Non-finite results are
    replaced by NaN and reported with a :class:`FieldEvaluationWarning`.
    """
    coords = [_real(c) for c in point]
    needed = variables(e)
    if needed and max(needed) >= len(coords):
        raise ValueError(f"expression uses variable {max(needed)} but point has "
                         f"{len(coords)} coordinates")
    dtype = np.result_type(np.float64, *coords)
    with np.errstate(all="ignore"):
        out = _eval(e, coords, {})
        shape = np.broadcast_shapes(*(c.shape for c in coords)) if coords else ()
        out = np.broadcast_to(np.asarray(out, dtype=dtype), shape).copy()
    bad = ~np.isfinite(out)
    if bad.any():
        out[bad] = np.nan
        warnings.warn(f"{int(bad.sum())} non-finite field value(s) replaced by NaN",
                      FieldEvaluationWarning, stacklevel=2)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- fields

def multi_indices(order: int, nvars: int, exact: bool = False):
    """All multi-indices with ``nvars`` entries and total ``<= order`` (or ``== order``)."""
    for alpha in product(range(order + 1), repeat=nvars):
        s = sum(alpha)
        if s == order or (not exact and s < order):
            yield alpha


class Field:
    """A scalar field with all partial derivatives up to ``max_order`` precomputed.

    Derivatives are keyed by the multi-index ``(l, j_1, ..., j_d)`` and built
    eagerly, so the instance is read-only after construction.
    """

    def __init__(self, base: Expr | str, d: int = 1, max_order: int = 0):
        if isinstance(base, str):
            self.source = base
            base = parse(base, d)
        else:
            self.source = to_string(base, d)
        self.base = base
        self.d = d
        self.max_order = max_order
        cache = {(0,) * (d + 1): base}
        # grow by total order so each entry comes from an existing lower one
        for order in range(1, max_order + 1):
            for alpha in multi_indices(order, d + 1, exact=True):
                var = next(i for i, a in enumerate(alpha) if a > 0)
                lower = list(alpha)
                lower[var] -= 1
                cache[alpha] = differentiate(cache[tuple(lower)], var)
        self._cache = cache

    def derivative(self, alpha) -> Expr:
        alpha = tuple(alpha)
        if len(alpha) != self.d + 1:
            raise ValueError(f"multi-index {alpha} has wrong length for d={self.d}")
        try:
            return self._cache[alpha]
        except KeyError:
            raise KeyError(f"derivative {alpha} exceeds max order {self.max_order}") from None

    def __call__(self, *point, alpha=None):
        e = self.base if alpha is None else self.derivative(alpha)
        return evaluate(e, point)

    def __repr__(self):
        return f"Field({self.source!r}, d={self.d}, max_order={self.max_order})"
