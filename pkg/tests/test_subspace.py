import math

import mpmath
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from stratcheck.subspace import (
    Subspace,
    delta,
    kernel_of_covector,
    orthogonal_complement,
    orthonormalize,
    span,
)


def random_subspace(rng, n, k):
    return orthonormalize(list(rng.standard_normal((k, n))), ambient_dim=n)


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def test_line_angle_is_sine():
    for theta in (1e-9, 0.1, 1.0, math.pi / 2 - 1e-9):
        d = delta(span([1, 0]), span([math.cos(theta), math.sin(theta)]))
        assert abs(d - math.sin(theta)) <= 1e-12


def test_asymmetry():
    plane = span([1, 0, 0], [0, 1, 0])
    line = span([1, 0, 0])
    assert delta(plane, line) == 1.0
    assert delta(line, plane) == 0.0


def test_zero_and_full_spaces():
    z = Subspace.zero(3)
    f = Subspace.full(3)
    assert delta(z, span([1, 2, 3])) == 0.0
    assert delta(span([1, 2, 3]), f) == 0.0
    assert delta(f, z) == 1.0


def test_rank_deficient_input_is_reduced():
    s = span([1, 0, 0], [2, 0, 0], [0, 1, 0])
    assert s.dim == 2
    assert s.gram_error() < 1e-14


def test_kernel_of_covector():
    t = Subspace.full(3)
    k = kernel_of_covector([0, 0, 1], t)
    assert k.dim == 2
    assert delta(k, span([1, 0, 0], [0, 1, 0])) < 1e-15
    # a covector vanishing on t leaves t unchanged
    plane = span([1, 0, 0], [0, 1, 0])
    assert kernel_of_covector([0, 0, 5], plane).dim == 2


def test_mp_path():
    with mpmath.workdps(50):
        eps = mpmath.mpf("1e-30")
        a = orthonormalize([[mpmath.mpf(1), mpmath.mpf(0)]], ambient_dim=2)
        b = orthonormalize([[mpmath.mpf(1), eps]], ambient_dim=2)
        d = delta(a, b)
        assert abs(d - eps) < mpmath.mpf("1e-45")


dims = st.integers(min_value=1, max_value=5).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, n), st.integers(0, 2**31 - 1))
)


@settings(max_examples=80, deadline=None)
@given(dims)
def test_delta_properties(args):
    n, k, j, seed = args
    rng = np.random.default_rng(seed)
    t = random_subspace(rng, n, k)
    u = random_subspace(rng, n, j)
    d = delta(t, u)
    assert -1e-15 <= d <= 1 + 1e-12
    assert delta(t, t) <= 1e-12
    # contained in a bigger space: zero
    assert delta(t, orthonormalize(list(t.basis) + list(u.basis), ambient_dim=n)) <= 1e-10
    # rotation invariance
    q = random_rotation(rng, n)
    assert abs(delta(t.transformed(q), u.transformed(q)) - d) <= 1e-10
    # equal dimensions: symmetric
    if k == j:
        assert abs(delta(u, t) - d) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n), st.integers(0, 2**31 - 1))))
def test_complement(args):
    n, k, seed = args
    rng = np.random.default_rng(seed)
    t = random_subspace(rng, n, k)
    c = orthogonal_complement(t)
    assert c.dim == n - k
    if k and n - k:
        assert np.abs(t.basis @ c.basis.T).max() < 1e-12
    assert c.gram_error() < 1e-12
