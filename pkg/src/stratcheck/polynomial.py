"""Sparse multivariate polynomials with exact rational coefficients."""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import mpmath
import sympy

from .expr import BinOp, Const, Expr, Unary, Var, is_mp_point, parse, to_text

__all__ = ["Polynomial", "gradient_poly"]


def _coef(c) -> Fraction | float:
    if isinstance(c, float):
        return c
    return Fraction(c)


class Polynomial:
    """Polynomial in ``nvars`` variables stored as {exponent tuple: coefficient}.

    Coefficients are Fractions unless a float was supplied. Zero coefficients
    are never stored.
    """

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], object] | None = None):
        self.nvars = int(nvars)
        clean: dict[tuple[int, ...], Fraction | float] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps} for {self.nvars} variables")
            c = _coef(c)
            total = clean.get(exps, 0) + c
            if total == 0:
                clean.pop(exps, None)
            else:
                clean[exps] = total
        self.terms = clean

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, nvars: int, c) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        exps = [0] * nvars
        exps[index] = 1
        return cls(nvars, {tuple(exps): 1})

    @classmethod
    def from_expr(cls, e: Expr, nvars: int) -> "Polynomial":
        """Convert an expression built from +, -, *, constants and natural powers."""
        if isinstance(e, Const):
            return cls.constant(nvars, e.value)
        if isinstance(e, Var):
            if e.index >= nvars:
                raise ValueError(f"variable x{e.index + 1} outside {nvars} variables")
            return cls.variable(nvars, e.index)
        if isinstance(e, Unary) and e.op == "neg":
            return -cls.from_expr(e.arg, nvars)
        if isinstance(e, BinOp):
            if e.op == "^":
                if not (isinstance(e.right, Const) and float(e.right.value).is_integer() and e.right.value >= 0):
                    raise ValueError(f"not a polynomial: exponent {e.right}")
                return cls.from_expr(e.left, nvars) ** int(e.right.value)
            a = cls.from_expr(e.left, nvars)
            if e.op == "/":
                if not isinstance(e.right, Const) or e.right.value == 0:
                    raise ValueError(f"not a polynomial: division by {e.right}")
                return a / e.right.value
            b = cls.from_expr(e.right, nvars)
            return {"+": a.__add__, "-": a.__sub__, "*": a.__mul__}[e.op](b)
        raise ValueError(f"not a polynomial: {e}")

    @classmethod
    def parse(cls, text: str, nvars: int, names=None) -> "Polynomial":
        return cls.from_expr(parse(text, names), nvars)

    # ring operations ------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials in different numbers of variables")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, 0) + c
        return Polynomial(self.nvars, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        terms: dict[tuple[int, ...], object] = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                k = tuple(a + b for a, b in zip(ka, kb))
                terms[k] = terms.get(k, 0) + ca * cb
        return Polynomial(self.nvars, terms)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if isinstance(c, Polynomial):
            raise TypeError("polynomial division is not supported")
        return self * (Fraction(1) / Fraction(c) if not isinstance(c, float) else 1.0 / c)

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self.terms == other.terms
        if isinstance(other, (int, Fraction, float)):
            return self == Polynomial.constant(self.nvars, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self})"

    def __str__(self):
        return to_text(self.to_expr()) if self.terms else "0"

    # queries ---------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def degree_in(self, index: int) -> int:
        return max((k[index] for k in self.terms), default=0)

    def diff(self, index: int) -> "Polynomial":
        terms = {}
        for k, c in self.terms.items():
            if k[index]:
                kk = list(k)
                kk[index] -= 1
                terms[tuple(kk)] = c * k[index]
        return Polynomial(self.nvars, terms)

    def gradient(self) -> tuple["Polynomial", ...]:
        return tuple(self.diff(i) for i in range(self.nvars))

    def abs_bound(self) -> "Polynomial":
        """Same monomials with absolute coefficients; evaluated at |x| it bounds
        the sum of absolute term values (used as a rounding-noise scale)."""
        return Polynomial(self.nvars, {k: abs(c) for k, c in self.terms.items()})

    def substitute(self, values: Mapping[int, object]) -> "Polynomial":
        """Replace the given variables by constants; the variable count is kept."""
        terms: dict[tuple[int, ...], object] = {}
        for k, c in self.terms.items():
            kk = list(k)
            for i, v in values.items():
                if kk[i]:
                    c = c * _coef(v) ** kk[i]
                    kk[i] = 0
            terms[tuple(kk)] = terms.get(tuple(kk), 0) + c
        return Polynomial(self.nvars, terms)

    def compose_affine(self, matrix, offset) -> "Polynomial":
        """Return q with q(x) = p(matrix @ x + offset)."""
        n = self.nvars
        images = []
        for i in range(n):
            q = Polynomial.constant(n, _coef(offset[i]))
            for j in range(n):
                if matrix[i][j] != 0:
                    q = q + Polynomial.variable(n, j) * _coef(matrix[i][j])
            images.append(q)
        result = Polynomial(n)
        for k, c in self.terms.items():
            term = Polynomial.constant(n, c)
            for i, e in enumerate(k):
                if e:
                    term = term * images[i] ** e
            result = result + term
        return result

    # evaluation --------------------------------------------------------------

    def to_expr(self) -> Expr:
        expr: Expr | None = None
        for k in sorted(self.terms, reverse=True):
            c = self.terms[k]
            mono: Expr | None = None
            for i, e in enumerate(k):
                if e:
                    f = Var(i) if e == 1 else BinOp("^", Var(i), Const(Fraction(e)))
                    mono = f if mono is None else BinOp("*", mono, f)
            if mono is None:
                term = Const(c)
            elif c == 1:
                term = mono
            elif c == -1:
                term = Unary("neg", mono)
            else:
                term = BinOp("*", Const(c), mono)
            if expr is None:
                expr = term
            elif isinstance(term, Const) and term.value < 0:
                expr = BinOp("-", expr, Const(-term.value))
            elif isinstance(term, Unary):
                expr = BinOp("-", expr, term.arg)
            elif isinstance(term, BinOp) and term.op == "*" and isinstance(term.left, Const) and term.left.value < 0:
                expr = BinOp("-", expr, BinOp("*", Const(-term.left.value), term.right))
            else:
                expr = BinOp("+", expr, term)
        return expr if expr is not None else Const(Fraction(0))

    @cached_property
    def _compiled(self) -> Expr:
        return self.to_expr()

    def __call__(self, point):
        return self.evaluate(point)

    def evaluate(self, point):
        """Exact when every coordinate is an int/Fraction, mpf for mpf points,
        float otherwise."""
        if len(point) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates, got {len(point)}")
        if all(isinstance(v, (int, Fraction)) for v in point):
            total = Fraction(0)
            for k, c in self.terms.items():
                term = c
                for v, e in zip(point, k):
                    if e:
                        term = term * Fraction(v) ** e
                total += term
            return total
        if not self.terms:
            return mpmath.mpf(0) if is_mp_point(point) else 0.0
        return self._compiled(point)

    # sympy bridge (gcd only) -------------------------------------------------

    def to_sympy(self, symbols):
        return sympy.Add(*[
            sympy.Rational(c.numerator, c.denominator) * sympy.Mul(*[s ** e for s, e in zip(symbols, k)])
            if isinstance(c, Fraction) else sympy.Float(c) * sympy.Mul(*[s ** e for s, e in zip(symbols, k)])
            for k, c in self.terms.items()
        ])

    def is_square_free(self) -> bool:
        """True when gcd(p, dp/dx_1, ..., dp/dx_n) is a constant."""
        if self.is_zero():
            return False
        syms = sympy.symbols(f"v0:{self.nvars}")
        polys = [self.to_sympy(syms)] + [d.to_sympy(syms) for d in self.gradient() if not d.is_zero()]
        g = sympy.gcd_list(polys, *syms) if len(polys) > 1 else polys[0]
        return sympy.Poly(g, *syms).total_degree() == 0


def gradient_poly(p: Polynomial) -> tuple[Polynomial, ...]:
    return p.gradient()


def polys_from_texts(texts: Iterable[str], nvars: int, names=None) -> tuple[Polynomial, ...]:
    return tuple(Polynomial.parse(t, nvars, names) for t in texts)
