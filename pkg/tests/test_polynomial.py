from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratcheck.expr import parse
from stratcheck.polynomial import Polynomial, gradient_poly


def P(text, n=2):
    return Polynomial.parse(text, n, ["x", "y", "z"][:n])


def test_arithmetic_and_degree():
    p = P("x^2 - z*y^2", 3)
    assert p.degree == 3
    assert p.degree_in(1) == 2
    assert P("(x+y)^2") == P("x^2 + 2*x*y + y^2")
    assert (P("x") * P("y") - P("x*y")).is_zero()


def test_coefficients_are_exact():
    p = P("x/3 + y/6")
    assert p.evaluate([Fraction(1), Fraction(1)]) == Fraction(1, 2)


def test_gradient():
    dx, dy = gradient_poly(P("x^3*y - y^2"))
    assert dx == P("3*x^2*y")
    assert dy == P("x^3 - 2*y")


def test_square_free():
    assert P("x*y").is_square_free()
    assert P("y^2 - x^3").is_square_free()
    assert not P("x^2*y").is_square_free()
    assert not P("(x - y)^2*(x + 1)").is_square_free()


def test_non_polynomial_rejected():
    with pytest.raises(ValueError):
        Polynomial.from_expr(parse("exp(x)"), 1)
    with pytest.raises(ValueError):
        Polynomial.from_expr(parse("1/x"), 1)


def test_compose_affine_is_a_change_of_variables():
    import numpy as np

    p = P("x^2 - y")
    m = np.array([[0.0, 1.0], [1.0, 0.0]])
    q = p.compose_affine(m, np.array([1.0, 0.0]))
    # q(u) = p(m u + b)
    u = np.array([0.3, -0.7])
    assert float(q.evaluate(list(u))) == pytest.approx(float(p.evaluate(list(m @ u + [1.0, 0.0]))))


coef = st.integers(min_value=-5, max_value=5)
polys = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)), coef, max_size=5).map(
    lambda d: Polynomial(2, d)
)


@settings(max_examples=60, deadline=None)
@given(polys, polys, polys)
def test_ring_laws(a, b, c):
    assert a + b == b + a
    assert a * (b + c) == a * b + a * c
    assert (a * b) * c == a * (b * c)
    assert (a - a).is_zero()


@settings(max_examples=40, deadline=None)
@given(polys, st.fractions(min_value=-3, max_value=3, max_denominator=7), st.fractions(min_value=-3, max_value=3, max_denominator=7))
def test_evaluation_is_a_homomorphism(a, x, y):
    b = a * a + a
    assert b.evaluate([x, y]) == a.evaluate([x, y]) ** 2 + a.evaluate([x, y])
