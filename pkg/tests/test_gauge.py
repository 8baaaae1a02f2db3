import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatcs.expr import Var, cos, sin
from flatcs.forms import max_abs
from flatcs.gauge import (IDENTITIES, CSContext, GaugeError, covariant_derivative_0form, cs_finite_difference, cs_form,
                          cs_form_expanded, cs_form_transgression, cs_functional, cs_gradient_pairing, curvature,
                          gauge_act, gauge_field, sample_points, verify_identity)
from flatcs.lie import LieAlgebraSpec

from helpers import (SU2, closed_form_abelian_cs, random_algebra_field, random_connection, random_constant,
                     random_group_field)

U1 = LieAlgebraSpec.u1()
PRODUCT = LieAlgebraSpec(("su2", "u1"), (0.7, 1.3))
SCENARIO_SEEDS = [11, 23, 37, 41, 59]


def random_fields(spec, n, seed):
    rng = np.random.default_rng(seed)
    return {
        "A": random_connection(spec, n, rng),
        "A0": random_connection(spec, n, rng, 0.3),
        "a": random_connection(spec, n, rng, 0.3),
        "u": random_group_field(spec, n, rng),
        "v": random_group_field(spec, n, rng),
        "g": random_constant(spec, rng),
        "X": random_algebra_field(spec, n, rng),
        # pure gauge, hence a flat but non-constant reference
        "flat": gauge_act(random_group_field(spec, n, rng), gauge_field({}, n, spec)),
    }


def inputs_for(name, fields):
    if name == "flat_gauge_change_density":
        return dict(fields, A0=fields["flat"])
    return fields


def applicable(n):
    return [c.name for c in IDENTITIES.values()
            if (c.exact_dim is None or c.exact_dim == n) and n >= c.min_dim]


@pytest.mark.parametrize("seed", SCENARIO_SEEDS)
@pytest.mark.parametrize("name", applicable(3))
def test_identities_on_random_su2_scenarios(seed, name):
    fields = random_fields(SU2, 3, seed)
    tol = IDENTITIES[name].tolerance
    assert verify_identity(name, inputs_for(name, fields), 3, sample_points(3, 8, 100, seed)) < tol


@pytest.mark.parametrize("seed", SCENARIO_SEEDS)
@pytest.mark.parametrize("name", ["transgression_4d", "cs_derivative_4d", "theta_closed"])
def test_four_dimensional_identities(seed, name):
    fields = random_fields(SU2, 4, seed)
    assert verify_identity(name, fields, 4, sample_points(4, 8, 100, seed)) < 1e-8


@pytest.mark.parametrize("spec", [U1, PRODUCT], ids=["u1", "su2xu1"])
def test_identities_on_other_groups(spec):
    fields = random_fields(spec, 3, 5)
    for name in applicable(3):
        assert verify_identity(name, inputs_for(name, fields), 3) < IDENTITIES[name].tolerance, name


def test_registry_rejects_bad_requests():
    fields = random_fields(SU2, 3, 0)
    with pytest.raises(GaugeError):
        verify_identity("no_such_identity", fields, 3)
    with pytest.raises(GaugeError):
        verify_identity("transgression_4d", fields, 3)
    with pytest.raises(GaugeError):
        verify_identity("bianchi", {}, 3)
    with pytest.raises(GaugeError):
        verify_identity("flat_gauge_change_density", fields, 3)


@given(st.integers(0, 2**32 - 1))
def test_three_chern_simons_densities_agree(seed):
    rng = np.random.default_rng(seed)
    ctx = CSContext(SU2, 3, random_connection(SU2, 3, rng, 0.3))
    A = random_connection(SU2, 3, rng)
    P = sample_points(3, 3, 20, seed)
    base = cs_form(A, ctx)
    assert max_abs(base - cs_form_expanded(A, ctx), P) < 1e-12
    assert max_abs(base - cs_form_transgression(A, ctx), P) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_gradient_pairing_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    ctx = CSContext(SU2, 3, grid=12)
    A, a = random_connection(SU2, 3, rng), random_connection(SU2, 3, rng)
    exact = cs_gradient_pairing(A, a, ctx)
    assert cs_finite_difference(A, a, ctx) == pytest.approx(exact, abs=1e-6 * (1 + abs(exact)))


@given(st.integers(0, 2**32 - 1))
def test_gauge_directions_are_critical(seed):
    # the gradient annihilates d_A X for every connection (infinitesimal gauge invariance)
    rng = np.random.default_rng(seed)
    A, X = random_connection(SU2, 3, rng), random_algebra_field(SU2, 3, rng)
    assert cs_gradient_pairing(A, covariant_derivative_0form(A, X), CSContext(SU2, 3, grid=12)) == pytest.approx(0, abs=1e-11)


@pytest.mark.parametrize("seed", [1, 2])
def test_functional_is_invariant_under_small_gauge_transformations(seed):
    rng = np.random.default_rng(seed)
    A, u = random_connection(SU2, 3, rng), random_group_field(SU2, 3, rng, 0.3)
    ctx = CSContext(SU2, 3, grid=20)
    assert cs_functional(gauge_act(u, A), ctx) == pytest.approx(cs_functional(A, ctx), abs=1e-9)


def test_curvature_of_pure_gauge_vanishes():
    u = random_group_field(SU2, 3, np.random.default_rng(8))
    pure = gauge_act(u, gauge_field({}, 3, SU2))
    assert max_abs(curvature(pure), sample_points(3)) < 1e-12


@pytest.mark.parametrize("coeffs", [
    (lambda x: [0, sp_sin(x[0]), sp_cos(x[0]) / 2], [0, sin(Var(0)), 0.5 * cos(Var(0))]),
    (lambda x: [sp_cos(x[1]), 0, sp_sin(x[1])], [cos(Var(1)), 0, sin(Var(1))]),
    (lambda x: [sp_sin(x[2]) ** 2, sp_cos(x[2]), sp_sin(x[0] + x[2])],
     [sin(Var(2)) * sin(Var(2)), cos(Var(2)), sin(Var(0) + Var(2))]),
], ids=["helix_x", "helix_y", "mixed"])
def test_abelian_functional_against_exact_integration(coeffs):
    build, fields = coeffs
    exact, _ = closed_form_abelian_cs(build)
    A = gauge_field({a: [f] for a, f in enumerate(fields) if not (isinstance(f, int) and f == 0)}, 3, U1)
    # for u(1) the bracket vanishes and cs(A) = <A ^ dA> with <iX, iY> = XY
    assert cs_functional(A, CSContext(U1, 3, grid=16)) == pytest.approx(exact, rel=1e-12, abs=1e-10)


def sp_sin(v):
    import sympy
    return sympy.sin(v)


def sp_cos(v):
    import sympy
    return sympy.cos(v)


def test_su2_functional_restricted_to_one_axis_matches_the_abelian_value():
    # a connection along a single algebra direction has no bracket terms
    exact, ratio = closed_form_abelian_cs(lambda x: [0, sp_sin(x[0]), sp_cos(x[0])])
    assert ratio == 8
    A = gauge_field({1: [sin(Var(0)), 0, 0], 2: [cos(Var(0)), 0, 0]}, 3, SU2)
    assert cs_functional(A, CSContext(SU2, 3, grid=16)) == pytest.approx(exact, rel=1e-13)


def test_gauge_action_checks_groups():
    with pytest.raises(GaugeError):
        gauge_act(random_group_field(U1, 3, np.random.default_rng(0)), random_connection(SU2, 3, np.random.default_rng(0)))
