import math

import numpy as np
import pytest

from stratcheck.expr import parse
from stratcheck.polynomial import Polynomial
from stratcheck.strata import (
    Box,
    FunctionOnSpace,
    ImplicitStratum,
    ParametricStratum,
    PointStratum,
    RankDrop,
    Stratification,
    in_closure,
    level_tangent_at,
    membership,
    rank_at,
    validate,
)
from stratcheck.subspace import delta, span

NAMES = ["x", "y", "z"]


def implicit(name, eqs, ineqs, dim, n=2):
    return ImplicitStratum(
        name,
        n,
        tuple(Polynomial.parse(e, n, NAMES[:n]) for e in eqs),
        tuple(parse(i, NAMES[:n]) for i in ineqs),
        dim,
    )


CIRCLE = implicit("C", ["x^2 + y^2 - 1"], [], 1)
UPPER = implicit("U", [], ["y"], 2)
BOX = Box.from_pairs([[-2, 2], [-2, 2]])


def test_box():
    b = Box.from_pairs([[0, 4], [-1, 1]])
    assert b.dim == 2
    assert list(b.center) == [2, 0]
    assert b.contains([4, 1]) and not b.contains([4, 1], margin=0.1)
    p = b.points(50, seed=1)
    assert p.shape == (50, 2) and all(b.contains(x) for x in p)
    assert np.array_equal(p, b.points(50, seed=1))


def test_point_stratum():
    p = PointStratum("O", (1.0, 2.0))
    assert p.dim == 0
    assert p.contains([1.0, 2.0]) and not p.contains([1.0, 2.1])
    assert p.tangent_at([1.0, 2.0]).dim == 0


def test_circle_membership_tangent_projection():
    x = np.array([math.cos(0.3), math.sin(0.3)])
    assert membership(CIRCLE, x)
    assert not membership(CIRCLE, 1.01 * x)
    t = CIRCLE.tangent_at(x)
    assert delta(t, span([-x[1], x[0]])) < 1e-12
    p = CIRCLE.project(1.3 * x)
    foot = p[0] if isinstance(p, tuple) else p
    assert np.linalg.norm(np.asarray(foot, dtype=float) - x) < 1e-10


def test_newton_converges_quadratically_to_the_set():
    x, ok = CIRCLE.newton(np.array([0.9, 0.5]))
    assert ok
    assert abs(x[0] ** 2 + x[1] ** 2 - 1) < 1e-14


def test_open_stratum_respects_inequalities():
    assert membership(UPPER, [0.3, 0.2])
    assert not membership(UPPER, [0.3, -0.2])
    assert UPPER.tangent_at([0.0, 1.0]).dim == 2
    assert UPPER.boundary_distance([0.0, 0.25]) == pytest.approx(0.25)


def test_singular_point_is_not_regular():
    cross = implicit("X", ["x*y"], [], 1)
    assert cross.is_regular([0.5, 0.0])
    assert not cross.is_regular([0.0, 0.0])


def test_samples_lie_on_the_stratum():
    pts = CIRCLE.sample(40, seed=2, box=BOX)
    assert len(pts) == 40
    assert all(membership(CIRCLE, p) for p in pts)


def test_parametric_curve():
    c = ParametricStratum("P", 2, (parse("u", ["u"]), parse("u^2", ["u"])), ((0.0, 1.0),))
    assert c.dim == 1
    x = c.phi([0.5])
    assert list(x) == [0.5, 0.25]
    u, d = c.invert([0.5, 0.25])
    assert abs(float(u[0]) - 0.5) < 1e-10 and d < 1e-10
    assert delta(c.tangent_at(x), span([1, 1])) < 1e-12
    assert not c.contains([0.5, 0.3])
    assert not c.contains([1.5, 2.25])  # outside the domain


def test_rank_and_level_tangent():
    f = FunctionOnSpace(parse("y"), 2)
    assert rank_at(CIRCLE, f, [1.0, 0.0]) == 1
    assert rank_at(CIRCLE, f, [0.0, 1.0]) == 0  # top of the circle is critical for y
    assert rank_at(CIRCLE, f, [math.cos(1), math.sin(1)]) == 1
    lt = level_tangent_at(UPPER, f, [0.0, 0.5])
    assert delta(lt, span([1, 0])) < 1e-12


def test_declared_rank_wins():
    f = FunctionOnSpace(parse("y"), 2, {"C": 1, "U": 0})
    assert rank_at(CIRCLE, f, [0.0, 1.0]) == 1
    assert level_tangent_at(UPPER, f, [0.0, 0.5]).dim == 2


def test_tangent_at_a_singular_point_raises():
    cross = implicit("X", ["x*y"], [], 1)
    with pytest.raises(RankDrop):
        cross.tangent_at([0.0, 0.0])


def test_transformed_stratum_moves_with_the_map():
    theta = 0.7
    m = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    b = np.array([0.5, -1.0])
    c2 = CIRCLE.transformed(m, b)
    x = np.array([0.6, 0.8])
    assert membership(c2, m @ x + b)
    assert delta(c2.tangent_at(m @ x + b), CIRCLE.tangent_at(x).transformed(m)) < 1e-10


def test_in_closure():
    origin = PointStratum("O", (0.0, 0.0))
    assert in_closure(origin, UPPER, BOX)
    assert in_closure(origin, CIRCLE, BOX) is False


def test_stratification_order():
    O = PointStratum("O", (0.0, 0.0))
    L = implicit("L", ["y"], ["x"], 1)
    S = Stratification({"O": O, "L": L, "U": UPPER}, [("O", "L"), ("L", "U"), ("O", "U")], BOX)
    assert S.is_partial_order()
    assert S.below("U") == {"O", "L"}
    bad = Stratification({"O": O, "L": L}, [("O", "L"), ("L", "O")], BOX)
    assert not bad.is_partial_order()


def test_validate_flags_overlap():
    a = implicit("A", ["y"], [], 1)
    b = implicit("B", ["y"], ["x"], 1)
    r = validate(Stratification({"A": a, "B": b}, [], BOX), samples_per_stratum=30)
    assert not r.axioms["disjoint"].passed


def test_validate_flags_missing_frontier_point():
    L = implicit("L", ["y"], ["x"], 1)
    r = validate(Stratification({"L": L}, [], BOX), samples_per_stratum=50)
    assert not r.axioms["S2"].passed
    assert r.axioms["S2"].witnesses


def test_moved_stratum_keeps_precision_near_its_singular_line():
    s = implicit("S", ["x^2 - z*y^2"], ["y"], 2, n=3)
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    b = np.array([0.3, -0.7, 0.1])
    moved = s.transformed(q, b)
    expanded = ImplicitStratum("E", 3, moved.equations, moved.inequalities, 2)
    p = np.array([0.5e-7, 1e-7, 0.25])  # on the surface, 1e-7 from the z-axis
    x = q @ p + b
    assert abs(moved.residuals(x)[0]) < 1e-20
    # the expanded polynomial loses everything to cancellation here
    assert abs(expanded.residuals(x)[0]) > 1e-18
    assert delta(moved.tangent_at(x), s.tangent_at(p).transformed(q)) < 1e-8
