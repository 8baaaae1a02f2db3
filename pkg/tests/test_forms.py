import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatcs.expr import Num, Var, sin
from flatcs.forms import (FormError, VForm, bracket_wedge, d, evaluate, inner_wedge, integrate, max_abs,
                          multi_indices, twisted_derivative, wedge_with_pairing)
from flatcs.gauge import curvature
from flatcs.jets import TorusSpec

from helpers import SU2, random_connection, trig

seeds = st.integers(0, 2**32 - 1)


def random_form(rng, n, k, spec=None):
    comps = {}
    for I in multi_indices(n, k):
        comps[I] = trig(n, rng) if spec is None else [trig(n, rng) for _ in range(spec.dim)]
    return VForm.from_components(n, k, comps, spec)


def pts(n, seed=0):
    return TorusSpec(n).sample_points(3, 20, seed)


@st.composite
def shapes(draw, pairs=1):
    n = draw(st.integers(1, 4))
    degrees = [draw(st.integers(0, n)) for _ in range(pairs)]
    return n, degrees


@given(seeds, shapes())
def test_d_squared_vanishes(seed, shape):
    n, (k,) = shape
    alpha = random_form(np.random.default_rng(seed), n, k)
    assert max_abs(d(d(alpha)), pts(n)) < 1e-12


@given(seeds, shapes(pairs=2))
def test_leibniz_rule(seed, shape):
    n, (p, q) = shape
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, n, p), random_form(rng, n, q)
    lhs = d(wedge_with_pairing("scalar", a, b))
    rhs = wedge_with_pairing("scalar", d(a), b) + (-1) ** p * wedge_with_pairing("scalar", a, d(b))
    assert max_abs(lhs - rhs, pts(n)) < 1e-12


@given(seeds, shapes(pairs=2))
def test_graded_commutativity(seed, shape):
    n, (p, q) = shape
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, n, p), random_form(rng, n, q)
    diff = wedge_with_pairing("scalar", a, b) - (-1) ** (p * q) * wedge_with_pairing("scalar", b, a)
    assert max_abs(diff, pts(n)) < 1e-13


@given(seeds, shapes(pairs=3))
def test_wedge_is_associative(seed, shape):
    n, (p, q, r) = shape
    rng = np.random.default_rng(seed)
    a, b, c = (random_form(rng, n, k) for k in (p, q, r))
    w = lambda x, y: wedge_with_pairing("scalar", x, y)
    assert max_abs(w(w(a, b), c) - w(a, w(b, c)), pts(n)) < 1e-12


@given(seeds, st.integers(1, 3), st.integers(0, 3), st.integers(0, 3))
def test_algebra_valued_symmetries(seed, n, p, q):
    p, q = min(p, n), min(q, n)
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, n, p, SU2), random_form(rng, n, q, SU2)
    sign = (-1) ** (p * q)
    P = pts(n)
    assert max_abs(inner_wedge(a, b) - sign * inner_wedge(b, a), P) < 1e-13
    assert max_abs(bracket_wedge(a, b) + sign * bracket_wedge(b, a), P) < 1e-13


@given(seeds, st.integers(2, 4), st.integers(0, 2))
def test_twisted_derivative_squares_to_curvature(seed, n, k):
    rng = np.random.default_rng(seed)
    A = random_connection(SU2, n, rng)
    alpha = random_form(rng, n, k, SU2)
    lhs = twisted_derivative(A, twisted_derivative(A, alpha))
    assert max_abs(lhs - bracket_wedge(curvature(A), alpha), pts(n)) < 1e-11


def test_determinant_convention():
    w = wedge_with_pairing("scalar", VForm.from_components(2, 1, {(0,): 1.0}), VForm.from_components(2, 1, {(1,): 1.0}))
    assert evaluate(w, [0, 0], [[1, 0], [0, 1]]) == pytest.approx(1.0)
    assert evaluate(w, [0, 0], [[0, 1], [1, 0]]) == pytest.approx(-1.0)
    assert evaluate(w, [0, 0], [[1, 2], [3, 4]]) == pytest.approx(-2.0)


def test_unsorted_indices_absorb_the_sign():
    f = VForm.from_components(3, 2, {(2, 0): 1.0})
    assert evaluate(f, [0, 0, 0], [[1, 0, 0], [0, 0, 1]]) == pytest.approx(-1.0)
    assert max_abs(VForm.from_components(3, 2, {(1, 1): 1.0}), pts(3)) == 0


@given(seeds, st.integers(1, 4))
def test_integral_of_exact_forms_vanishes(seed, n):
    beta = random_form(np.random.default_rng(seed), n, n - 1)
    assert integrate(d(beta), 16) == pytest.approx(0, abs=1e-12)


def test_integrals_of_known_top_forms():
    assert integrate(VForm.from_components(3, 3, {(0, 1, 2): Num(2.0)}), 4) == pytest.approx(2 * (2 * math.pi) ** 3)
    s = sin(Var(0))
    assert integrate(VForm.from_components(2, 2, {(1, 0): s * s}), 8) == pytest.approx(-2 * math.pi**2, rel=1e-14)


def test_shape_errors():
    a = VForm.from_components(3, 1, {(0,): 1.0})
    with pytest.raises(FormError):
        a + VForm.from_components(3, 2, {(0, 1): 1.0})
    with pytest.raises(FormError):
        integrate(a, 4)
    with pytest.raises(FormError):
        evaluate(a, [0, 0, 0], [[1, 0, 0], [0, 1, 0]])
    with pytest.raises(FormError):
        VForm.from_components(2, 1, {(0,): [1.0, 2.0]}, SU2)
    with pytest.raises(FormError):
        a.at(np.zeros((2, 2)))
