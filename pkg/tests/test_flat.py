import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatcs.forms import inner_wedge, max_abs
from flatcs.gauge import curvature, gauge_act
from flatcs.groupfields import BumpMap
from flatcs.flat import (FlatContext, FlatOptions, FlatSearchError, HolonomyData, HolonomyError, TwistedFourierGauge,
                         TwistingError, degree_flat, find_flat_connection, gauge_change_check, holonomy_of, log_csv,
                         make_twisted_algebra_field, make_twisted_gauge_field, make_twisted_group_field,
                         periodicity_residual, validate_twisting)
from flatcs.jets import TWO_PI, grid_points
from flatcs.lie import LieAlgebraSpec

from helpers import SU2

U1 = LieAlgebraSpec.u1()
PRODUCT = LieAlgebraSpec(("su2", "u1"))
seeds = st.integers(0, 2**32 - 1)


def random_holonomy(spec, rng):
    angles = rng.uniform(-math.pi, math.pi, (3, len(spec.factors)))
    return HolonomyData.toral(spec, angles, spec.random_group(rng))


def test_holonomies_must_commute_and_share_a_torus():
    i = [0.0, 1.0, 0.0, 0.0]
    j = [0.0, 0.0, 1.0, 0.0]
    with pytest.raises(HolonomyError):
        HolonomyData(SU2, (i, j, SU2.identity()))
    with pytest.raises(HolonomyError):
        HolonomyData(SU2, (i, i))
    assert HolonomyData.trivial(SU2).is_trivial


@given(seeds, st.sampled_from([SU2, U1, PRODUCT]))
def test_toral_presentation_round_trips(seed, spec):
    rng = np.random.default_rng(seed)
    hol = random_holonomy(spec, rng)
    rebuilt = HolonomyData.toral(spec, hol.angles, hol.frame)
    assert np.allclose(rebuilt.array, hol.array, atol=1e-12)


@given(seeds, st.sampled_from([SU2, U1, PRODUCT]))
def test_random_twisted_fields_obey_their_laws(seed, spec):
    rng = np.random.default_rng(seed)
    hol = random_holonomy(spec, rng)
    a = make_twisted_algebra_field(hol, rng)
    A = make_twisted_gauge_field(hol, rng)
    u = make_twisted_group_field(a)
    for f in (a, A, u):
        assert validate_twisting(f) < 1e-12
    # invariant densities built from twisted fields are periodic
    assert periodicity_residual(inner_wedge(A.carrier, curvature(A.carrier))) < 1e-11
    assert validate_twisting(type(A)(gauge_act(u.carrier, A.carrier), hol, "gauge")) < 1e-11


def test_untwisted_fields_fail_validation_for_nontrivial_holonomy():
    rng = np.random.default_rng(0)
    hol = HolonomyData.toral(SU2, [[math.pi / 2], [0.0], [0.0]])
    periodic = make_twisted_algebra_field(HolonomyData.trivial(SU2), rng)
    assert validate_twisting(type(periodic)(periodic.carrier, hol, "algebra")) > 1e-3
    with pytest.raises(TwistingError):
        make_twisted_group_field(make_twisted_gauge_field(hol, rng))


def test_holonomy_of_toral_connections():
    hol = HolonomyData.toral(SU2, [[0.4], [-0.3], [1.1]])
    ctx = FlatContext(hol).toral_reference(0.25, axis=1)
    assert np.allclose(holonomy_of(FlatContext(hol).reference, hol, 0), hol.array[0], atol=1e-14)
    expected = SU2.mul(hol.array[1], SU2.exp(np.array([-0.25 * TWO_PI, 0, 0])))
    assert np.allclose(holonomy_of(ctx.reference, hol, 1), expected, atol=1e-12)


@given(seeds)
def test_small_twisted_gauge_transformations_have_degree_zero(seed):
    rng = np.random.default_rng(seed)
    hol = random_holonomy(SU2, rng)
    u = make_twisted_group_field(make_twisted_algebra_field(hol, rng, amplitude=0.4))
    ctx = FlatContext(hol, grid=16)
    assert degree_flat(u, ctx) == pytest.approx(0, abs=1e-8)
    assert degree_flat(u, ctx.toral_reference(0.3)) == pytest.approx(0, abs=1e-8)


def test_degree_rejects_fields_violating_the_law():
    hol = HolonomyData.toral(SU2, [[math.pi / 2], [0.0], [0.0]])
    with pytest.raises(TwistingError):
        degree_flat(BumpMap(SU2, 0.2, 3.0) * make_twisted_group_field(
            make_twisted_algebra_field(HolonomyData.trivial(SU2), np.random.default_rng(1))).carrier, FlatContext(hol))


def test_gauge_change_on_a_twisted_bundle():
    rng = np.random.default_rng(7)
    hol = HolonomyData.toral(SU2, [[0.7], [-0.4], [0.2]], SU2.random_group(rng))
    A = make_twisted_gauge_field(hol, rng)
    u = make_twisted_group_field(make_twisted_algebra_field(hol, rng))
    for ctx in (FlatContext(hol, grid=24), FlatContext(hol, grid=24).toral_reference(0.5)):
        res = gauge_change_check(A, u, ctx)
        assert res.difference < 1e-8 and res.density_residual < 1e-8


def _fourier_state(hol, rng, B=2, amp=0.1):
    st = TwistedFourierGauge(hol, B)
    st.coef = amp * (rng.standard_normal(st.coef.shape) + 1j * rng.standard_normal(st.coef.shape))
    return st


@pytest.mark.parametrize("spec", [SU2, U1, PRODUCT], ids=["su2", "u1", "su2xu1"])
def test_fourier_residual_matches_the_curvature_of_the_field(spec):
    rng = np.random.default_rng(2)
    hol = random_holonomy(spec, rng)
    st = _fourier_state(hol, rng)
    A = st.to_form()
    assert validate_twisting(st.to_twisted()) < 1e-11
    N = st.default_grid()
    F = curvature(A).at(grid_points(3, N), 0).val  # (P, 3 slots, dim)
    direct = np.sum(F * F * np.diag(st.spec.metric())) * (TWO_PI / N) ** 3
    assert st.residual() == pytest.approx(direct, rel=1e-11)


@pytest.mark.parametrize("spec", [SU2, PRODUCT], ids=["su2", "su2xu1"])
def test_fourier_gradient_matches_finite_differences(spec):
    rng = np.random.default_rng(3)
    st = _fourier_state(random_holonomy(spec, rng), rng)
    _, g = st.gradient()
    for _ in range(3):
        delta = rng.standard_normal(st.coef.shape) + 1j * rng.standard_normal(st.coef.shape)
        t = 1e-6
        fd = (st.copy(st.coef + t * delta).residual() - st.copy(st.coef - t * delta).residual()) / (2 * t)
        assert fd == pytest.approx(float(np.sum((np.conj(g) * delta).real)), rel=1e-6)


def test_projection_recovers_band_limited_fields():
    rng = np.random.default_rng(4)
    st = _fourier_state(random_holonomy(SU2, rng), rng)
    back = TwistedFourierGauge.project(st.to_form(), st.holonomy, st.B)
    assert max_abs(back.to_form() - st.to_form(), grid_points(3, 5)) < 1e-12


def test_abelian_search_is_one_projection():
    rng = np.random.default_rng(5)
    hol = random_holonomy(U1, rng)
    opts = FlatOptions(tol=1e-20)
    out = find_flat_connection(_fourier_state(hol, rng), opts=opts)
    assert out.residual() < 1e-20
    assert len(opts.log) == 2


def test_nonabelian_search_converges_from_a_small_perturbation():
    hol = HolonomyData.toral(SU2, [[math.pi / 2], [0.0], [0.0]])
    rng = np.random.default_rng(0)
    base = FlatContext(hol).toral_reference(0.5).reference
    # smooth (bandwidth-one) perturbation; white-noise coefficients stall the descent
    bump = make_twisted_gauge_field(hol, rng, bandwidth=1, amplitude=3e-3).carrier
    start = TwistedFourierGauge.project(base + bump, hol, 2)
    opts = FlatOptions(tol=1e-10, bandwidth=2)
    out = find_flat_connection(start, opts=opts)
    assert out.residual() < 1e-10
    assert max_abs(curvature(out.to_form()), grid_points(3, 6)) < 1e-4
    residuals = [r for _, r, _ in opts.log]
    assert all(b <= a for a, b in zip(residuals, residuals[1:]))
    text = log_csv(opts.log)
    assert text.splitlines()[0] == "iteration,residual,step"
    assert len(text.splitlines()) == len(opts.log) + 1


def test_search_reports_failure_with_the_last_iterate():
    hol = HolonomyData.toral(SU2, [[math.pi / 2], [0.0], [0.0]])
    start = _fourier_state(hol, np.random.default_rng(8), 1, 0.5)
    with pytest.raises(FlatSearchError) as err:
        find_flat_connection(start, opts=FlatOptions(max_iters=3, bandwidth=1))
    assert err.value.iterate is not None and err.value.residual > 0
