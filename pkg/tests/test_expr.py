import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratcheck.expr import (
    Const,
    DomainError,
    ParseError,
    differentiate,
    evaluate,
    gradient,
    parse,
    substitute,
    to_text,
    var,
)


def test_precedence_and_right_associative_power():
    assert evaluate(parse("2^3^2"), []) == 512
    assert evaluate(parse("-2^2"), []) == -4
    assert evaluate(parse("1 - 2 - 3"), []) == -4
    assert evaluate(parse("8 / 2 / 2"), []) == 2


def test_aliases_and_explicit_names():
    e = parse("x*y + z")
    assert evaluate(e, [2, 3, 4]) == 10
    e = parse("u - v", ["u", "v"])
    assert evaluate(e, [5, 2]) == 3
    assert evaluate(parse("x2", None), [0, 7]) == 7


def test_rational_constants_stay_exact():
    e = parse("1/3 + 1/6")
    assert isinstance(e, Const)
    assert e.value == 0.5 or str(e.value) == "1/2"


@pytest.mark.parametrize("text", ["x +", "2 ** 3", "foo(x)", "(x", "x y", "3 $ 4"])
def test_parse_errors_point_at_the_problem(text):
    with pytest.raises(ParseError) as err:
        parse(text)
    assert err.value.line == 1
    assert 1 <= err.value.column <= len(text) + 1


@pytest.mark.parametrize(
    "text, point",
    [("1/x", [0.0]), ("log(x)", [-1.0]), ("x^0.5", [-2.0]), ("x^-1", [0.0])],
)
def test_domain_errors(text, point):
    with pytest.raises(DomainError):
        evaluate(parse(text), point)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(parse("x*y"), [1.0])


def test_derivatives_known_cases():
    e = parse("y^x")
    dx, dy = gradient(e, 2)
    p = [1.5, 0.3]
    assert evaluate(dx, p) == pytest.approx(0.3**1.5 * math.log(0.3))
    assert evaluate(dy, p) == pytest.approx(1.5 * 0.3**0.5)
    assert evaluate(differentiate(parse("sin(x)*exp(x)"), 0), [0.0]) == pytest.approx(1.0)
    assert evaluate(differentiate(parse("abs(x)"), 0), [-2.0]) == -1


def test_mp_points_evaluate_in_extended_precision():
    e = parse("exp(-1/x)")
    with mpmath.workdps(60):
        v = evaluate(e, [mpmath.mpf("0.001")])
        assert isinstance(v, mpmath.mpf)
        assert v > 0  # underflows to 0.0 in double precision
    assert evaluate(e, [0.001]) == 0.0


def test_substitute_composes():
    e = parse("x^2 + y")
    g = substitute(e, [var(1), var(0)])
    assert evaluate(g, [2.0, 3.0]) == 11.0


small = st.floats(min_value=-3, max_value=3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(small, small)
def test_gradient_matches_central_difference(a, b):
    e = parse("sin(x*y) + x^3 - cos(y)*x + exp(y/4)")
    h = 1e-6
    for i, g in enumerate(gradient(e, 2)):
        p = [a, b]
        up, dn = list(p), list(p)
        up[i] += h
        dn[i] -= h
        fd = (evaluate(e, up) - evaluate(e, dn)) / (2 * h)
        assert evaluate(g, p) == pytest.approx(fd, rel=1e-5, abs=1e-5)


@pytest.mark.parametrize(
    "text", ["x^2 - z*y^2", "exp(-1/(t*x))", "-(x - 1/4)*(4 - x)", "sin(1/x)*x", "2^-3", "y^x"]
)
def test_text_round_trip(text):
    e = parse(text)
    assert parse(to_text(e)) == e
