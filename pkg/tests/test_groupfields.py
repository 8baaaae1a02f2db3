import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatcs.groupfields import (BumpMap, Constant, GroupFieldError, OracleError, QExp, brouwer_degree_oracle,
                                degree_trivial, haar_integral, maurer_cartan_data, mc_pullback, normalization_constant,
                                theta_on_vectors)
from flatcs.jets import TorusSpec
from flatcs.lie import NORMALIZED_SU2_SCALE, LieAlgebraSpec
from flatcs.scenario import parse_field

from helpers import SU2, matrix_theta, random_constant, random_group_field

PRODUCT = LieAlgebraSpec(("su2", "u1"))
seeds = st.integers(0, 2**32 - 1)
specs = st.sampled_from([SU2, LieAlgebraSpec.u1(), PRODUCT])


@given(seeds, specs)
def test_group_fields_stay_on_the_group(seed, spec):
    u = random_group_field(spec, 3, np.random.default_rng(seed))
    vals = u.values(TorusSpec(3).sample_points(4, 10))
    for s in spec.group_slices:
        assert np.allclose(np.linalg.norm(vals[:, s], axis=1), 1.0, atol=1e-13)


@given(seeds, specs)
def test_maurer_cartan_form_matches_finite_differences(seed, spec):
    rng = np.random.default_rng(seed)
    u = random_group_field(spec, 3, rng)
    x = rng.uniform(0, 2 * math.pi, (4, 3))
    theta = mc_pullback(u).at(x, 0).val  # (P, slot, algebra)
    g_inv = spec.inv(u.values(x))
    h = 1e-6
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        fwd = spec.log(spec.mul(g_inv, u.values(x + e)))
        bwd = spec.log(spec.mul(g_inv, u.values(x - e)))
        assert np.allclose(theta[:, a], (fwd - bwd) / (2 * h), atol=1e-7)


@given(seeds)
def test_group_jets_carry_consistent_second_derivatives(seed):
    rng = np.random.default_rng(seed)
    u = random_group_field(SU2, 3, rng) ** 2
    x = rng.uniform(0, 2 * math.pi, (3, 3))
    j = u.at(x)
    h = 1e-6
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        fd = (u.at(x + e, 1).d1 - u.at(x - e, 1).d1) / (2 * h)
        assert np.allclose(j.d2[a], fd, atol=1e-6)


@given(seeds)
def test_field_algebra(seed):
    rng = np.random.default_rng(seed)
    u, v = random_group_field(SU2, 3, rng), random_group_field(SU2, 3, rng)
    x = rng.uniform(0, 2 * math.pi, (5, 3))
    U, V = u.values(x), v.values(x)
    assert np.allclose((u * v).values(x), SU2.mul(U, V), atol=1e-13)
    assert np.allclose((u.inverse() * u).values(x), SU2.identity(), atol=1e-13)
    assert np.allclose((u**3).values(x), SU2.mul(U, SU2.mul(U, U)), atol=1e-12)
    assert np.allclose(u.conjugated_by(v).values(x), SU2.mul(SU2.inv(V), SU2.mul(U, V)), atol=1e-13)


def test_theta_on_the_standard_frame():
    i, j, k = np.eye(3)
    assert theta_on_vectors(SU2, i, j, k) == matrix_theta(i, j, k) == -2.0


@given(st.integers(0, 2**32 - 1))
def test_theta_is_bi_invariant_and_alternating(seed):
    rng = np.random.default_rng(seed)
    X, Y, Z = (SU2.random_algebra(rng) for _ in range(3))
    g = SU2.random_group(rng)
    t = theta_on_vectors(SU2, X, Y, Z)
    assert theta_on_vectors(SU2, *(SU2.adjoint(g, W) for W in (X, Y, Z))) == pytest.approx(t, abs=1e-12)
    assert theta_on_vectors(SU2, Y, X, Z) == pytest.approx(-t, abs=1e-12)
    assert t == pytest.approx(matrix_theta(X, Y, Z), abs=1e-12)


def test_sphere_integrals_fix_the_normalisation():
    data = maurer_cartan_data(32)
    assert data.volume == pytest.approx(2 * math.pi**2, rel=1e-13)
    assert data.theta_integral == pytest.approx(-4 * math.pi**2, rel=1e-13)
    assert data.theta_integral_chart == pytest.approx(data.theta_integral, rel=1e-12)
    assert data.lambda_star == pytest.approx(NORMALIZED_SU2_SCALE, rel=1e-13)
    assert normalization_constant(PRODUCT, 32)[1] is None


def test_haar_integral_of_polynomials():
    # the coordinate second moments of the unit 3-sphere are a quarter of its volume
    assert haar_integral(lambda q: q[:, 2] ** 2, 32) == pytest.approx(math.pi**2 / 2, rel=1e-13)
    assert haar_integral(lambda q: q[:, 0] * q[:, 3], 32) == pytest.approx(0, abs=1e-14)


def test_degree_of_maps_homotopic_to_constants():
    rng = np.random.default_rng(4)
    assert degree_trivial(random_constant(SU2, rng), N=8) == pytest.approx(0, abs=1e-14)
    u = QExp(SU2, [0.3, -0.1, 0.2])
    assert degree_trivial(u, N=8) == pytest.approx(0, abs=1e-14)
    assert degree_trivial(random_group_field(SU2, 3, rng, 0.2), N=24) == pytest.approx(0, abs=1e-8)


def test_exponential_along_fixed_axis_has_degree_zero():
    # the image lies on one great circle, so it misses almost all of S^3
    u = parse_field("qexp([pi*bump(r, 1, 3), 0, 0])", SU2, 3)
    assert degree_trivial(u, N=32) == pytest.approx(0, abs=1e-8)


@pytest.mark.parametrize("m", [1, -1])
def test_collapse_map_degree_and_oracle(m):
    u = BumpMap(SU2, 0.2, 3.0) ** m
    assert degree_trivial(u, N=32) == pytest.approx(m, abs=1e-6)
    res = brouwer_degree_oracle(u, [0.3, 0.5, -0.2, 0.1])
    assert res.degree == m
    assert np.all(res.signs == m)


def test_oracle_counts_zero_for_a_constant_map():
    res = brouwer_degree_oracle(Constant.identity(SU2), [0.3, 0.5, -0.2, 0.1])
    assert res.degree == 0 and len(res.preimages) == 0


def test_oracle_needs_an_su2_factor():
    with pytest.raises(OracleError):
        brouwer_degree_oracle(Constant.identity(PRODUCT), [0.0, 1.0], factor=1)


def test_bumpmap_validation_and_printing():
    with pytest.raises(GroupFieldError):
        BumpMap(SU2, 0.5, 4.0)
    with pytest.raises(GroupFieldError):
        BumpMap(SU2, 0.1, 3.0, 0, 1)
    with pytest.raises(GroupFieldError):
        BumpMap(PRODUCT, 0.1, 3.0, 1)
    assert BumpMap(SU2, 0.2, 3.0).to_text() == "bumpmap(0.2, 3.0)"
    assert BumpMap(SU2, 0.1, 3.1, 0, 6).to_text() == "bumpmap(0.1, 3.1, 0, 6)"
    u = BumpMap(PRODUCT, 0.2, 3.0)
    x = np.array([[math.pi] * 3, [0.0, 0.0, 0.0]])
    assert np.allclose(u.values(x), [[-1, 0, 0, 0, 1, 0], [1, 0, 0, 0, 1, 0]])
