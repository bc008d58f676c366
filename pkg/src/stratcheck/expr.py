"""Closed-form scalar expressions: parsing, evaluation and symbolic derivatives.

Expressions are immutable trees. Evaluation goes through a compiled Python
closure; a point whose coordinates are ``mpmath.mpf`` is evaluated in
extended precision, anything else in double precision.

Text syntax::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?            # right associative
    atom    := number | name | func "(" expr ")" | "(" expr ")"
    func    := exp | log | sin | cos | abs | sign

Variables are ``x1, x2, ...`` (1-based) with the aliases ``x, y, z, t`` for
the first four, unless the caller passes an explicit list of names.
``sign`` only appears in derivatives of ``abs``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

import mpmath

__all__ = [
    "DomainError",
    "ParseError",
    "Expr",
    "Const",
    "Var",
    "BinOp",
    "Unary",
    "const",
    "var",
    "exp",
    "log",
    "sin",
    "cos",
    "parse",
    "evaluate",
    "differentiate",
    "gradient",
    "substitute",
    "to_text",
]

DEFAULT_ALIASES = ("x", "y", "z", "t")
FUNCTIONS = ("exp", "log", "sin", "cos", "abs", "sign")


class DomainError(ArithmeticError):
    """Evaluation left the domain of a subexpression."""

    def __init__(self, message: str, subexpr: "Expr | None" = None, point=None):
        super().__init__(message)
        self.subexpr = subexpr
        self.point = None if point is None else tuple(point)

    def __str__(self) -> str:
        msg = self.args[0]
        if self.subexpr is not None:
            msg += f" in {self.subexpr}"
        if self.point is not None:
            msg += f" at {self.point}"
        return msg


class ParseError(ValueError):
    def __init__(self, message: str, text: str, pos: int):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.column = col


# ---------------------------------------------------------------------------
# tree


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __add__(self, other):
        return BinOp("+", self, _wrap(other))

    def __radd__(self, other):
        return BinOp("+", _wrap(other), self)

    def __sub__(self, other):
        return BinOp("-", self, _wrap(other))

    def __rsub__(self, other):
        return BinOp("-", _wrap(other), self)

    def __mul__(self, other):
        return BinOp("*", self, _wrap(other))

    def __rmul__(self, other):
        return BinOp("*", _wrap(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, _wrap(other))

    def __rtruediv__(self, other):
        return BinOp("/", _wrap(other), self)

    def __pow__(self, other):
        return BinOp("^", self, _wrap(other))

    def __rpow__(self, other):
        return BinOp("^", _wrap(other), self)

    def __neg__(self):
        return Unary("neg", self)

    def __call__(self, point):
        return evaluate(self, point)

    def __str__(self) -> str:
        return to_text(self)

    @cached_property
    def max_var(self) -> int:
        """Largest variable index used, or -1 for a constant expression."""
        return _max_var(self)

    @cached_property
    def _compiled(self):
        return _compile(self)

    def diff(self, index: int) -> "Expr":
        return differentiate(self, index)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: Fraction | float

    def __post_init__(self):
        if isinstance(self.value, int):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Unary(Expr):
    op: str  # neg, exp, log, sin, cos, abs, sign
    arg: Expr


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def _wrap(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Const(Fraction(value))
    if isinstance(value, float):
        return Const(value)
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


def const(value) -> Const:
    return _wrap(value)


def var(index: int) -> Var:
    return Var(index)


def exp(e) -> Expr:
    return Unary("exp", _wrap(e))


def log(e) -> Expr:
    return Unary("log", _wrap(e))


def sin(e) -> Expr:
    return Unary("sin", _wrap(e))


def cos(e) -> Expr:
    return Unary("cos", _wrap(e))


def _max_var(e: Expr) -> int:
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Const):
        return -1
    if isinstance(e, BinOp):
        return max(_max_var(e.left), _max_var(e.right))
    return _max_var(e.arg)


def _is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _is_integer(value) -> bool:
    return float(value).is_integer()


# ---------------------------------------------------------------------------
# smart constructors (light folding keeps derivative trees small)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return _neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1):
        return a
    if _is_const(a, 0) and not _is_const(b, 0):
        return ZERO
    return BinOp("/", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def _pow(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1):
        return a
    if _is_const(b, 0):
        return ONE
    return BinOp("^", a, b)


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Expr, index: int) -> Expr:
    """Symbolic partial derivative with respect to variable ``index`` (0-based)."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == index else ZERO
    if not _uses(e, index):
        return ZERO
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = differentiate(a, index), differentiate(b, index)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        if e.op == "/":
            return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Const(Fraction(2))))
        # power rule; constant exponent keeps a <= 0 legal for integer powers
        if _is_const(db, 0):
            return _mul(_mul(b, _pow(a, _sub(b, ONE))), da)
        if _is_const(da, 0):
            return _mul(_mul(e, Unary("log", a)), db)
        return _mul(e, _add(_mul(db, Unary("log", a)), _div(_mul(b, da), a)))
    u = e.arg
    du = differentiate(u, index)
    if _is_const(du, 0):
        return ZERO
    if e.op == "neg":
        return _neg(du)
    if e.op == "exp":
        return _mul(e, du)
    if e.op == "log":
        return _div(du, u)
    if e.op == "sin":
        return _mul(Unary("cos", u), du)
    if e.op == "cos":
        return _neg(_mul(Unary("sin", u), du))
    if e.op == "abs":
        return _mul(Unary("sign", u), du)
    if e.op == "sign":
        # derivative of sign is 0 away from 0 and undefined at 0
        return _mul(ZERO, Unary("sign", u))
    raise ValueError(f"unknown operator {e.op}")


def _uses(e: Expr, index: int) -> bool:
    if isinstance(e, Var):
        return e.index == index
    if isinstance(e, Const):
        return False
    if isinstance(e, BinOp):
        return _uses(e.left, index) or _uses(e.right, index)
    return _uses(e.arg, index)


def gradient(e: Expr, n: int) -> tuple[Expr, ...]:
    return tuple(differentiate(e, i) for i in range(n))


# ---------------------------------------------------------------------------
# evaluation


def _f_div(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


def _f_log(a):
    if a <= 0:
        raise DomainError("log of non-positive value")
    return math.log(a)


def _f_exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        raise DomainError("exp overflow") from None


def _f_pow(a, b):
    if _is_integer(b):
        k = int(b)
        if a == 0 and k < 0:
            raise DomainError("zero to a negative power")
        try:
            return a ** k
        except OverflowError:
            raise DomainError("power overflow") from None
    if a <= 0:
        raise DomainError("non-integer power of non-positive base")
    try:
        return a ** b
    except OverflowError:
        raise DomainError("power overflow") from None


def _f_sign(a):
    if a == 0:
        raise DomainError("sign (derivative of abs) undefined at 0")
    return 1.0 if a > 0 else -1.0


def _m_log(a):
    if a <= 0:
        raise DomainError("log of non-positive value")
    return mpmath.log(a)


def _m_pow(a, b):
    if _is_integer(b):
        k = int(b)
        if a == 0 and k < 0:
            raise DomainError("zero to a negative power")
        return a ** k
    if a <= 0:
        raise DomainError("non-integer power of non-positive base")
    return mpmath.power(a, b)


def _m_sign(a):
    if a == 0:
        raise DomainError("sign (derivative of abs) undefined at 0")
    return mpmath.mpf(1) if a > 0 else mpmath.mpf(-1)


_FLOAT_NS = {
    "_div": _f_div, "_log": _f_log, "_exp": _f_exp, "_pow": _f_pow,
    "_sin": math.sin, "_cos": math.cos, "_abs": abs, "_sign": _f_sign,
}
_MP_NS = {
    "_div": _f_div, "_log": _m_log, "_exp": mpmath.exp, "_pow": _m_pow,
    "_sin": mpmath.sin, "_cos": mpmath.cos, "_abs": abs, "_sign": _m_sign,
}


def _compile(e: Expr):
    consts: list = []

    def emit(node: Expr) -> str:
        if isinstance(node, Const):
            consts.append(node.value)
            return f"_c{len(consts) - 1}"
        if isinstance(node, Var):
            return f"x[{node.index}]"
        if isinstance(node, BinOp):
            a, b = emit(node.left), emit(node.right)
            if node.op in "+-*":
                return f"({a} {node.op} {b})"
            if node.op == "/":
                return f"_div({a}, {b})"
            return f"_pow({a}, {b})"
        a = emit(node.arg)
        if node.op == "neg":
            return f"(-{a})"
        return f"_{node.op}({a})"

    body = emit(e)
    src = f"def _f(x):\n    return {body}\n"
    code = compile(src, "<expr>", "exec")
    fns = []
    for ns_base, conv in ((_FLOAT_NS, float), (_MP_NS, _to_mpf)):
        ns = dict(ns_base)
        ns.update({f"_c{i}": conv(c) for i, c in enumerate(consts)})
        exec(code, ns)
        fns.append(ns["_f"])
    return tuple(fns)


def _to_mpf(c):
    if isinstance(c, Fraction):
        return mpmath.mpf(c.numerator) / c.denominator
    return mpmath.mpf(c)


def is_mp_point(point) -> bool:
    return any(isinstance(v, mpmath.mpf) for v in point)


def evaluate(e: Expr, point: Sequence) -> float:
    """Evaluate ``e`` at ``point``.

    Raises DomainError (with the offending subexpression) on log of a
    non-positive number, non-integer power of a non-positive base, division by
    zero or the derivative of ``abs`` at 0.
    """
    if len(point) <= e.max_var:
        raise ValueError(f"point has dimension {len(point)}, expression uses x{e.max_var + 1}")
    f_float, f_mp = e._compiled
    mp = is_mp_point(point)
    try:
        if mp:
            return f_mp(point)
        return f_float([float(v) for v in point])
    except DomainError as err:
        raise _locate(e, point, mp, err) from None
    except ZeroDivisionError:
        raise _locate(e, point, mp, DomainError("division by zero")) from None


def _locate(e: Expr, point, mp: bool, err: DomainError) -> DomainError:
    """Walk the tree to find the innermost failing subexpression."""
    ns = _MP_NS if mp else _FLOAT_NS

    def walk(node):
        if isinstance(node, Const):
            return _to_mpf(node.value) if mp else float(node.value)
        if isinstance(node, Var):
            return point[node.index] if mp else float(point[node.index])
        if isinstance(node, BinOp):
            a, b = walk(node.left), walk(node.right)
            try:
                if node.op == "+":
                    return a + b
                if node.op == "-":
                    return a - b
                if node.op == "*":
                    return a * b
                if node.op == "/":
                    return ns["_div"](a, b)
                return ns["_pow"](a, b)
            except DomainError as inner:
                raise DomainError(inner.args[0], node, point) from None
        a = walk(node.arg)
        if node.op == "neg":
            return -a
        try:
            return ns["_" + node.op](a)
        except DomainError as inner:
            raise DomainError(inner.args[0], node, point) from None

    try:
        walk(e)
    except DomainError as located:
        return located
    return DomainError(err.args[0], e, point)


# ---------------------------------------------------------------------------
# text form

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _format_const(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            s = str(v.numerator)
        else:
            s = f"{v.numerator}/{v.denominator}"
            return f"({s})"
        return f"({s})" if v < 0 else s
    s = repr(float(v))
    if s in ("inf", "-inf", "nan"):
        raise ValueError(f"constant {s} has no text form")
    return f"({s})" if v < 0 else s


def to_text(e: Expr, names: Sequence[str] | None = None) -> str:
    def name(i: int) -> str:
        if names is not None:
            return names[i]
        return f"x{i + 1}"

    def fmt(node: Expr, parent_prec: int = 0, right: bool = False) -> str:
        if isinstance(node, Const):
            return _format_const(node.value)
        if isinstance(node, Var):
            return name(node.index)
        if isinstance(node, Unary):
            if node.op == "neg":
                s = "-" + fmt(node.arg, _PREC["neg"])
                return f"({s})" if parent_prec >= _PREC["neg"] else s
            return f"{node.op}({fmt(node.arg)})"
        prec = _PREC[node.op]
        if node.op == "^":
            s = f"{fmt(node.left, prec + 1)}^{fmt(node.right, prec)}"
        else:
            s = f"{fmt(node.left, prec)} {node.op} {fmt(node.right, prec + 1)}"
        return f"({s})" if prec < parent_prec or (prec == parent_prec and right) else s

    return fmt(e)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _name_table(names: Sequence[str] | Mapping[str, int] | None) -> dict[str, int]:
    if names is None:
        return {n: i for i, n in enumerate(DEFAULT_ALIASES)}
    if isinstance(names, Mapping):
        return dict(names)
    return {n: i for i, n in enumerate(names)}


class _Parser:
    def __init__(self, text: str, names):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = _name_table(names)
        self.indexed = names is None

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {value!r}, found {what}", self.text, tok[2])

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", self.text, tok[2])
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = _fold(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = _fold(op, e, self.unary(), self)
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            inner = self.unary()
            return Const(-inner.value) if isinstance(inner, Const) else Unary("neg", inner)
        if self.peek()[1] == "+" and self.peek()[0] == "op":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return _fold("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            return Const(Fraction(value))
        if kind == "name":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(value, arg)
            if value in self.names:
                return Var(self.names[value])
            m = re.fullmatch(r"x([1-9]\d*)", value)
            if self.indexed and m:
                return Var(int(m.group(1)) - 1)
            raise ParseError(f"unknown name {value!r}", self.text, pos)
        if value == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {what}", self.text, pos)


def _fold(op: str, a: Expr, b: Expr, parser=None) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        x, y = a.value, b.value
        if isinstance(x, Fraction) and isinstance(y, Fraction):
            if op == "+":
                return Const(x + y)
            if op == "-":
                return Const(x - y)
            if op == "*":
                return Const(x * y)
            if op == "/" and y != 0:
                return Const(x / y)
            if op == "^" and y.denominator == 1 and (x != 0 or y >= 0) and abs(y) <= 64:
                return Const(x ** int(y))
    return BinOp(op, a, b)


def parse(text: str, names: Sequence[str] | Mapping[str, int] | None = None) -> Expr:
    """Parse infix text into an expression.

    ``names`` maps variable names to 0-based indices; a sequence is taken in
    order. Without it, ``x1..xn`` and the aliases ``x, y, z, t`` are accepted.
    """
    return _Parser(text, names).parse()


def substitute(e: Expr, images: Sequence[Expr]) -> Expr:
    """Replace every variable x_i by ``images[i]``."""
    if isinstance(e, Var):
        return images[e.index]
    if isinstance(e, Const):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, images), substitute(e.right, images))
    return Unary(e.op, substitute(e.arg, images))
