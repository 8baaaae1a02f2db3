"""Connections in a fixed gauge: curvature, gauge action and Chern-Simons forms.

A gauge field is an algebra-valued 1-form :class:`~flatcs.forms.VForm`.
Curvature is ``F = dA + 1/2 [A ^ A]`` and a gauge transformation ``u`` acts
on the right by ``A -> Ad_{u^-1} A + u^{-1} du``.

The Chern-Simons 3-form relative to a reference ``A0`` is, with
``B = A - A0``::

    cs(A) = <(F_A + F_A0) ^ B> - 1/6 <B ^ [B ^ B]>

and the functional is its integral over T^3.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .forms import (
    ALGEBRA,
    VForm,
    bracket_wedge,
    d,
    inner_wedge,
    integrate,
    max_abs,
    twisted_derivative,
)
from .groupfields import (
    GroupField,
    adjoint_jet,
    jet_conj,
    mc_pullback,
    mc_three_form_pullback,
)
from .jets import TorusSpec
from .lie import LieAlgebraSpec

FD_STEP = 1e-4
TRANSGRESSION_NODES = 8
FLATNESS_TOL = 1e-10


class GaugeError(ValueError):
    pass


def gauge_field(components: Mapping[int, object], n: int, spec: LieAlgebraSpec) -> VForm:
    """``sum_a components[a] dx_a`` with one algebra coefficient list per axis."""
    return VForm.from_components(n, 1, {(int(a),): c for a, c in components.items()}, spec)


def zero_connection(n: int, spec: LieAlgebraSpec) -> VForm:
    return VForm.zero(n, 1, (spec.dim,), spec)


def _require_gauge(A: VForm):
    if A.degree != 1 or A.vspace != ALGEBRA:
        raise GaugeError("a gauge field is an algebra-valued 1-form")


def curvature(A: VForm) -> VForm:
    _require_gauge(A)
    return d(A) + 0.5 * bracket_wedge(A, A)


def adjoint_form(u: GroupField, alpha: VForm, inverse: bool = True) -> VForm:
    """Pointwise ``Ad_{u^-1} alpha`` (or ``Ad_u alpha``) for an algebra-valued form."""
    spec = alpha.spec

    def ev(points, order):
        g = u.at(points, order)
        if inverse:
            g = jet_conj(spec, g)
        g = g.linear(lambda a: a[..., None, :])  # broadcast over the form slots
        return adjoint_jet(spec, g, alpha.at(points, order))

    return VForm(alpha.n, alpha.degree, alpha.vshape, ev, spec)


def gauge_act(u: GroupField, A: VForm) -> VForm:
    """``phi*A = Ad_{u^-1} A + u*theta``."""
    _require_gauge(A)
    if u.spec.factors != A.spec.factors:
        raise GaugeError("gauge transformation and connection use different groups")
    theta = mc_pullback(u, A.n)
    theta = VForm(A.n, 1, theta.vshape, theta._eval, A.spec)
    return adjoint_form(u, A) + theta


# -- Chern-Simons ------------------------------------------------------------------------

@dataclass
class CSContext:
    """Inner-product scales, reference connection and quadrature grid."""

    spec: LieAlgebraSpec
    n: int = 3
    reference: VForm | None = None
    grid: int = 16

    def __post_init__(self):
        if self.reference is None:
            self.reference = zero_connection(self.n, self.spec)
        _require_gauge(self.reference)

    def with_spec(self, A: VForm) -> VForm:
        """The same form measured with this context's inner-product scales."""
        return VForm(A.n, A.degree, A.vshape, A._eval, self.spec)


def _cs_parts(A: VForm, ctx: CSContext):
    A = ctx.with_spec(A)
    A0 = ctx.with_spec(ctx.reference)
    return A, A0, A - A0


def cs_form(A: VForm, ctx: CSContext) -> VForm:
    """Closed-form Chern-Simons 3-form."""
    A, A0, B = _cs_parts(A, ctx)
    return inner_wedge(curvature(A) + curvature(A0), B) - (1.0 / 6.0) * inner_wedge(B, bracket_wedge(B, B))


def cs_form_transgression(A: VForm, ctx: CSContext, nodes: int = TRANSGRESSION_NODES) -> VForm:
    """``2 int_0^1 <B ^ F_{A0 + tB}> dt`` by Gauss-Legendre in t."""
    A, A0, B = _cs_parts(A, ctx)
    x, w = np.polynomial.legendre.leggauss(nodes)
    t, w = (x + 1.0) / 2.0, w / 2.0
    total = None
    for tk, wk in zip(t, w):
        term = (2.0 * float(wk)) * inner_wedge(B, curvature(A0 + float(tk) * B))
        total = term if total is None else total + term
    return total


def cs_form_expanded(A: VForm, ctx: CSContext) -> VForm:
    """``2<B ^ F0> + <B ^ d_{A0} B> + 1/3 <B ^ [B ^ B]>``."""
    A, A0, B = _cs_parts(A, ctx)
    return (2.0 * inner_wedge(B, curvature(A0)) + inner_wedge(B, twisted_derivative(A0, B))
            + (1.0 / 3.0) * inner_wedge(B, bracket_wedge(B, B)))


def cs_functional(A: VForm, ctx: CSContext, grid: int | None = None) -> float:
    if A.n != 3:
        raise GaugeError("the Chern-Simons functional is defined on T^3")
    return integrate(cs_form(A, ctx), grid or ctx.grid)


def cs_gradient_pairing(A: VForm, a: VForm, ctx: CSContext, grid: int | None = None) -> float:
    """``dCS_A(a) = 2 int <F_A ^ a>``."""
    if A.n != 3:
        raise GaugeError("the gradient pairing is defined on T^3")
    A, a = ctx.with_spec(A), ctx.with_spec(a)
    return 2.0 * integrate(inner_wedge(curvature(A), a), grid or ctx.grid)


def cs_finite_difference(A: VForm, a: VForm, ctx: CSContext, t: float = FD_STEP, grid: int | None = None) -> float:
    """Central difference ``(CS(A + t a) - CS(A - t a)) / 2t``."""
    return (cs_functional(A + t * a, ctx, grid) - cs_functional(A - t * a, ctx, grid)) / (2.0 * t)


def covariant_derivative_0form(A: VForm, X: VForm) -> VForm:
    """``d_A X = dX + [A, X]`` for an algebra-valued function ``X`` (a gauge-orbit direction)."""
    return twisted_derivative(A, X)


def chern_weil_4form(A: VForm, ctx: CSContext | None = None) -> VForm:
    if A.n != 4:
        raise GaugeError("the Chern-Weil 4-form lives on T^4")
    if ctx is not None:
        A = ctx.with_spec(A)
    F = curvature(A)
    return inner_wedge(F, F)


def cs_density_untransgressed(A: VForm) -> VForm:
    """``<A ^ F_A> - 1/6 <A ^ [A ^ A]>`` (reference connection zero)."""
    return inner_wedge(A, curvature(A)) - (1.0 / 6.0) * inner_wedge(A, bracket_wedge(A, A))


# -- identity residuals -------------------------------------------------------------------

def sample_points(n: int, N: int = 8, extra: int = 100, seed: int = 0) -> np.ndarray:
    return TorusSpec(n).sample_points(N, extra, seed)


def residual_transgression_4d(A: VForm, points) -> float:
    """``d(<A ^ F> - 1/6 <A ^ [A ^ A]>) - <F ^ F>`` on T^4."""
    if A.n != 4:
        raise GaugeError("this identity compares 4-forms; use T^4")
    F = curvature(A)
    return max_abs(d(cs_density_untransgressed(A)) - inner_wedge(F, F), points)


def residual_cs_derivative_4d(A: VForm, A0: VForm, points) -> float:
    """``d cs(A) - (<F ^ F> - <F0 ^ F0>)`` on T^4."""
    if A.n != 4:
        raise GaugeError("this identity compares 4-forms; use T^4")
    ctx = CSContext(A.spec, 4, A0)
    F, F0 = curvature(A), curvature(A0)
    return max_abs(d(cs_form(A, ctx)) - (inner_wedge(F, F) - inner_wedge(F0, F0)), points)


def residual_gauge_change_density(A: VForm, u: GroupField, points) -> float:
    """``alpha(phi*A) - alpha(A) - u*Theta - d<Ad_{u^-1} A ^ u*theta>`` on T^3."""
    if A.n < 3:
        raise GaugeError("this identity needs n >= 3")
    spec = A.spec
    theta = VForm(A.n, 1, (spec.dim,), mc_pullback(u, A.n)._eval, spec)
    lhs = cs_density_untransgressed(gauge_act(u, A)) - cs_density_untransgressed(A)
    rhs = mc_three_form_pullback(u, spec, A.n) + d(inner_wedge(adjoint_form(u, A), theta))
    return max_abs(lhs - rhs, points)


def covariant_mc_form(u: GroupField, A0: VForm) -> VForm:
    """``u*theta + Ad_{u^-1} A0 - A0``: the Maurer-Cartan form measured against a flat ``A0``."""
    spec = A0.spec
    theta = VForm(A0.n, 1, (spec.dim,), mc_pullback(u, A0.n)._eval, spec)
    return theta + adjoint_form(u, A0) - A0


def theta_three_form(theta: VForm) -> VForm:
    return (-1.0 / 6.0) * inner_wedge(theta, bracket_wedge(theta, theta))


def residual_flat_gauge_change_density(A: VForm, u: GroupField, A0: VForm, points) -> float:
    """``cs(phi*A) - cs(A) - Theta(theta0) - d<Ad_{u^-1}(A - A0) ^ theta0>`` for flat ``A0``."""
    if max_abs(curvature(A0), points) > FLATNESS_TOL:
        raise GaugeError("flat_gauge_change_density needs a flat reference A0")
    ctx = CSContext(A.spec, A.n, A0)
    theta0 = covariant_mc_form(u, A0)
    lhs = cs_form(gauge_act(u, A), ctx) - cs_form(A, ctx)
    rhs = theta_three_form(theta0) + d(inner_wedge(adjoint_form(u, A - A0), theta0))
    return max_abs(lhs - rhs, points)


def residual_gauge_direction_derivative(X: VForm, points, t: float = FD_STEP) -> float:
    """Central difference of ``u_t^{-1} du_t`` at ``t = 0`` for ``u_t = exp(tX)`` against ``dX``."""
    from .groupfields import QExp

    spec = X.spec

    def exp_field(s):
        return QExp(spec, lambda p, o: X.at(p, o).linear(lambda a: s * a[..., 0, :]))

    plus = mc_pullback(exp_field(t), X.n).at(points).val
    minus = mc_pullback(exp_field(-t), X.n).at(points).val
    fd = (plus - minus) / (2.0 * t)
    return float(np.max(np.abs(fd - d(X).at(points).val)))


def residual_bianchi(A: VForm, points) -> float:
    return max_abs(twisted_derivative(A, curvature(A)), points)


def residual_mc_cocycle(u: GroupField, v: GroupField, n: int, points) -> float:
    """``(uv)*theta - Ad_{v^-1} u*theta - v*theta``."""
    lhs = mc_pullback(u * v, n)
    rhs = adjoint_form(v, mc_pullback(u, n)) + mc_pullback(v, n)
    return max_abs(lhs - rhs, points)


def residual_theta_bi_invariance(u: GroupField, g: GroupField, n: int, points, spec: LieAlgebraSpec | None = None) -> float:
    """Left and right translation by a constant ``g`` leave ``u*Theta`` unchanged."""
    base = mc_three_form_pullback(u, spec, n)
    left = mc_three_form_pullback(g * u, spec, n)
    right = mc_three_form_pullback(u * g, spec, n)
    return max(max_abs(left - base, points), max_abs(right - base, points))


def residual_theta_closed(u: GroupField, n: int, points, spec: LieAlgebraSpec | None = None) -> float:
    if n < 4:
        raise GaugeError("d(u*Theta) is a 4-form; use T^4")
    return max_abs(d(mc_three_form_pullback(u, spec, n)), points)


def residual_curvature_covariance(A: VForm, u: GroupField, points) -> float:
    """``F_{phi*A} - Ad_{u^-1} F_A``."""
    return max_abs(curvature(gauge_act(u, A)) - adjoint_form(u, curvature(A)), points)


def residual_curvature_variation(A: VForm, a: VForm, points) -> float:
    """``F_{A+a} - (F_A + d_A a + 1/2 [a ^ a])``."""
    rhs = curvature(A) + twisted_derivative(A, a) + 0.5 * bracket_wedge(a, a)
    return max_abs(curvature(A + a) - rhs, points)


def residual_cs_transgression(A: VForm, A0: VForm, points) -> float:
    ctx = CSContext(A.spec, A.n, A0)
    base = cs_form(A, ctx)
    return max(max_abs(base - cs_form_transgression(A, ctx), points), max_abs(base - cs_form_expanded(A, ctx), points))


def residual_gauge_right_action(A: VForm, u: GroupField, v: GroupField, points) -> float:
    return max_abs(gauge_act(v, gauge_act(u, A)) - gauge_act(u * v, A), points)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    anchor: str
    fn: Callable
    needs: tuple
    min_dim: int = 3
    exact_dim: int | None = None
    tolerance: float = 1e-8


#: Fixed registry: identity name -> statement checked. Reports copy the anchor verbatim.
IDENTITIES: dict[str, IdentityCheck] = {
    c.name: c
    for c in [
        IdentityCheck("transgression_4d", "d(<A^F> - 1/6 <A^[A^A]>) = <F^F>",
                      residual_transgression_4d, ("A",), exact_dim=4),
        IdentityCheck("cs_derivative_4d", "d cs(A) = <F^F> - <F0^F0>",
                      residual_cs_derivative_4d, ("A", "A0"), exact_dim=4),
        IdentityCheck("gauge_change_density", "alpha(phi*A) - alpha(A) = u*Theta + d<Ad(u^-1)A ^ u*theta>",
                      residual_gauge_change_density, ("A", "u")),
        IdentityCheck("gauge_direction_derivative", "d/dt (u_t^-1 du_t) at t=0 = dX",
                      residual_gauge_direction_derivative, ("X",), min_dim=1, tolerance=1e-6),
        IdentityCheck("flat_gauge_change_density",
                      "cs(phi*A) - cs(A) - Theta(theta0) = d<Ad(u^-1)(A-A0) ^ theta0>",
                      residual_flat_gauge_change_density, ("A", "u", "A0")),
        IdentityCheck("bianchi", "d_A F_A = 0", residual_bianchi, ("A",), min_dim=2),
        IdentityCheck("mc_cocycle", "(uv)*theta = Ad(v^-1) u*theta + v*theta",
                      residual_mc_cocycle, ("u", "v", "n"), min_dim=1),
        IdentityCheck("theta_bi_invariance", "L_g*Theta = R_g*Theta = Theta",
                      residual_theta_bi_invariance, ("u", "g", "n")),
        IdentityCheck("theta_closed", "d(u*Theta) = 0", residual_theta_closed, ("u", "n"), exact_dim=4),
        IdentityCheck("curvature_covariance", "F(phi*A) = Ad(u^-1) F_A",
                      residual_curvature_covariance, ("A", "u"), min_dim=2),
        IdentityCheck("curvature_variation", "F(A+a) = F_A + d_A a + 1/2 [a^a]",
                      residual_curvature_variation, ("A", "a"), min_dim=2),
        IdentityCheck("cs_transgression", "cs(A) = 2 int_0^1 <B ^ F(A0+tB)> dt",
                      residual_cs_transgression, ("A", "A0")),
        IdentityCheck("gauge_right_action", "(uv)*A = v*(u*A)",
                      residual_gauge_right_action, ("A", "u", "v"), min_dim=1),
    ]
}


def verify_identity(which: str, fields: Mapping[str, object], n: int, points=None) -> float:
    """Max pointwise residual of a registered identity.

    ``fields`` supplies the named inputs listed in ``IDENTITIES[which].needs``.
    """
    if which not in IDENTITIES:
        raise GaugeError(f"unknown identity {which!r}; known: {', '.join(sorted(IDENTITIES))}")
    check = IDENTITIES[which]
    if check.exact_dim is not None and n != check.exact_dim:
        raise GaugeError(f"{which} needs T^{check.exact_dim}")
    if n < check.min_dim:
        raise GaugeError(f"{which} needs n >= {check.min_dim}")
    if points is None:
        points = sample_points(n)
    args = []
    for key in check.needs:
        if key == "n":
            args.append(n)
        elif key not in fields:
            raise GaugeError(f"{which} needs a field named {key!r}")
        else:
            args.append(fields[key])
    return float(check.fn(*args, points))
