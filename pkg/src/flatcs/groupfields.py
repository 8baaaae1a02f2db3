"""Group-valued fields on the torus, Maurer-Cartan pullbacks and degrees.

A :class:`GroupField` is an expression tree whose nodes evaluate to second
order jets of group coordinates, shape ``(P, group_dim)``. Products of jets
are taken with the bilinear raw product and renormalised as jets, so
derivatives stay exact while ``|u| = 1`` is enforced.

Orientation
-----------
``Theta = -(1/6) <theta ^ [theta ^ theta]>`` evaluates to ``-2 lambda`` on
the frame ``(i, j, k)``, so it is a *negative* multiple of the standard
volume form of S^3. Degrees are reported in the orientation in which
``Theta`` is positive; with ``lambda = 1/(4 pi^2)`` the integral of ``u*Theta``
over T^3 is then the Brouwer degree of ``u``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import BUMP_SMOOTHNESS, Radial, _fmt, as_field, bump_profile
from .forms import VForm, bracket_wedge, inner_wedge
from .jets import TWO_PI, Jet, compensated_sum, grid_points, map_chunks
from .lie import SU2, U1, LieAlgebraSpec


class GroupFieldError(ValueError):
    pass


class OracleError(RuntimeError):
    """Raised when the Brouwer oracle suspects a non-regular value."""


# -- jet-level group operations ------------------------------------------------

def jet_mul(spec: LieAlgebraSpec, a: Jet, b: Jet) -> Jet:
    return jet_renormalize(spec, Jet.bilinear(a, b, spec.raw_mul))


def jet_conj(spec: LieAlgebraSpec, a: Jet) -> Jet:
    return a.linear(spec.conj)


def jet_renormalize(spec: LieAlgebraSpec, g: Jet) -> Jet:
    """Divide each factor block by its norm (a no-op on exact unit jets up to rounding)."""
    parts = []
    for s in spec.group_slices:
        block = g[s]
        sq = Jet.bilinear(block, block, lambda x, y: np.sum(x * y, axis=-1))
        inv = sq.apply(lambda t: t**-0.5, lambda t: -0.5 * t**-1.5, lambda t: 0.75 * t**-2.5)
        parts.append(Jet.bilinear(inv, block, lambda c, v: c[..., None] * v))
    return _concat(parts)


def _concat(parts: list[Jet]) -> Jet:
    order = min(p.order for p in parts)
    parts = [p.truncate(order) for p in parts]
    cat = lambda xs: np.concatenate(xs, axis=-1)
    return Jet(
        cat([p.val for p in parts]),
        cat([p.d1 for p in parts]) if order >= 1 else None,
        cat([p.d2 for p in parts]) if order >= 2 else None,
    )


def _series(s, terms, shift):
    # sum_k (-s)^k / (2k + shift)!  and its first two s-derivatives, for small s
    out = [np.zeros_like(s) for _ in range(3)]
    for k in range(terms):
        c = (-1.0) ** k / math.factorial(2 * k + shift)
        out[0] = out[0] + c * s**k
        if k >= 1:
            out[1] = out[1] + c * k * s ** (k - 1)
        if k >= 2:
            out[2] = out[2] + c * k * (k - 1) * s ** (k - 2)
    return out


_SMALL = 0.5


def _cos_sqrt(s):
    """``cos(sqrt s)`` with first and second derivatives in ``s``."""
    small = s < _SMALL
    t = np.sqrt(np.where(small, 1.0, s))
    c = np.cos(t)
    S = np.sin(t) / t
    S1 = (c - S) / (2 * np.where(small, 1.0, s))
    ser = _series(s, 16, 0)
    return (np.where(small, ser[0], c), np.where(small, ser[1], -S / 2), np.where(small, ser[2], -S1 / 2))


def _sinc_sqrt(s):
    """``sin(sqrt s) / sqrt s`` with first and second derivatives in ``s``."""
    small = s < _SMALL
    ss = np.where(small, 1.0, s)
    t = np.sqrt(ss)
    c = np.cos(t)
    S = np.sin(t) / t
    S1 = (c - S) / (2 * ss)
    S2 = (-S / 2 - 3 * S1) / (2 * ss)
    ser = _series(s, 16, 1)
    return (np.where(small, ser[0], S), np.where(small, ser[1], S1), np.where(small, ser[2], S2))


def jet_exp(spec: LieAlgebraSpec, X: Jet) -> Jet:
    """Exponential of an algebra-valued jet ``(P, dim)`` as a group jet."""
    parts = []
    for f, s in zip(spec.factors, spec.algebra_slices):
        x = X[s]
        if f == U1:
            parts.append(_concat([x.cos(), x.sin()]))
            continue
        sq = Jet.bilinear(x, x, lambda a, b: np.sum(a * b, axis=-1))
        c = sq.apply(*[(lambda i: (lambda t: _cos_sqrt(t)[i]))(i) for i in range(3)])
        S = sq.apply(*[(lambda i: (lambda t: _sinc_sqrt(t)[i]))(i) for i in range(3)])
        parts.append(_concat([c.linear(lambda a: a[..., None]), Jet.bilinear(S, x, lambda a, b: a[..., None] * b)]))
    return _concat(parts)


# -- expression nodes ----------------------------------------------------------------

class GroupField:
    """A map ``T^n -> G`` evaluable as a second-order jet."""

    spec: LieAlgebraSpec

    def at(self, points, order: int = 2) -> Jet:  # pragma: no cover - abstract
        raise NotImplementedError

    def values(self, points) -> np.ndarray:
        return self.at(points, 0).val

    def to_text(self) -> str:  # pragma: no cover - abstract
        raise NotImplementedError

    def __str__(self):
        return self.to_text()

    def __mul__(self, other: "GroupField") -> "GroupField":
        return Product(self, other)

    def inverse(self) -> "GroupField":
        return Power(self, -1)

    def conjugated_by(self, w: "GroupField") -> "GroupField":
        """``w^{-1} u w``."""
        return Conj(w, self)

    def __pow__(self, m: int) -> "GroupField":
        return Power(self, int(m))


def _check_points(points, n=None):
    points = np.asarray(points, float)
    if points.ndim != 2:
        raise GroupFieldError("points must have shape (P, n)")
    return points


@dataclass(frozen=True, eq=True)
class Constant(GroupField):
    spec: LieAlgebraSpec
    value: tuple

    def __post_init__(self):
        v = np.asarray(self.value, float)
        if v.shape != (self.spec.group_dim,):
            raise GroupFieldError(f"constant needs {self.spec.group_dim} coordinates")
        object.__setattr__(self, "value", tuple(self.spec.renormalize(v).tolist()))

    @classmethod
    def identity(cls, spec: LieAlgebraSpec) -> "Constant":
        return cls(spec, tuple(spec.identity().tolist()))

    def at(self, points, order: int = 2):
        points = _check_points(points)
        P, n = points.shape
        return Jet.constant(np.broadcast_to(np.array(self.value), (P, self.spec.group_dim)).copy(), n, order)

    def to_text(self):
        blocks = self.spec.split(np.array(self.value), kind="group")
        return "const(" + "".join("[" + ", ".join(_fmt(v) for v in b) + "]" for b in blocks) + ")"


@dataclass(frozen=True, eq=False)
class QExp(GroupField):
    """Pointwise exponential of an algebra-valued field.

    ``coefs`` is either one scalar field per algebra coordinate or a
    callable ``(points, order)`` returning an algebra jet ``(P, dim)`` (used for
    twisted fields).
    """

    spec: LieAlgebraSpec
    coefs: tuple | Callable

    def __post_init__(self):
        if not callable(self.coefs):
            coefs = tuple(as_field(c) for c in self.coefs)
            if len(coefs) != self.spec.dim:
                raise GroupFieldError(f"qexp needs {self.spec.dim} algebra coefficients, got {len(coefs)}")
            object.__setattr__(self, "coefs", coefs)

    def algebra_jet(self, points, order: int = 2) -> Jet:
        points = _check_points(points)
        if callable(self.coefs):
            return self.coefs(points, order)
        parts = [c.jet(points, order).linear(lambda a: a[..., None]) for c in self.coefs]
        return _concat(parts)

    def at(self, points, order: int = 2):
        return jet_exp(self.spec, self.algebra_jet(points, order))

    def __eq__(self, other):
        return isinstance(other, QExp) and self.spec == other.spec and self.coefs == other.coefs

    __hash__ = None

    def to_text(self):
        if callable(self.coefs):
            raise GroupFieldError("a qexp of a generated field has no text form")
        blocks = []
        for s in self.spec.algebra_slices:
            blocks.append("[" + ", ".join(c.to_text() for c in self.coefs[s]) + "]")
        return "qexp(" + "".join(blocks) + ")"


@dataclass(frozen=True, eq=True)
class Product(GroupField):
    left: GroupField
    right: GroupField

    def __post_init__(self):
        if self.left.spec != self.right.spec:
            raise GroupFieldError("factors of a product live in different groups")

    @property
    def spec(self):
        return self.left.spec

    def at(self, points, order: int = 2):
        return jet_mul(self.spec, self.left.at(points, order), self.right.at(points, order))

    def to_text(self):
        return f"{self.left.to_text()} * {_wrap_group(self.right)}"


def _wrap_group(g: GroupField) -> str:
    # products parse left-associatively
    return f"({g.to_text()})" if isinstance(g, Product) else g.to_text()


@dataclass(frozen=True, eq=True)
class Conj(GroupField):
    """``w^{-1} u w``."""

    w: GroupField
    u: GroupField

    @property
    def spec(self):
        return self.u.spec

    def at(self, points, order: int = 2):
        w = self.w.at(points, order)
        return jet_mul(self.spec, jet_mul(self.spec, jet_conj(self.spec, w), self.u.at(points, order)), w)

    def to_text(self):
        return f"conj({self.w.to_text()}, {self.u.to_text()})"


@dataclass(frozen=True, eq=True)
class Power(GroupField):
    base: GroupField
    exponent: int

    @property
    def spec(self):
        return self.base.spec

    def at(self, points, order: int = 2):
        g = self.base.at(points, order)
        if self.exponent < 0:
            g = jet_conj(self.spec, g)
        m = abs(self.exponent)
        if m == 0:
            return Constant.identity(self.spec).at(points, order)
        out = g
        for _ in range(m - 1):
            out = jet_mul(self.spec, out, g)
        return out

    def to_text(self):
        return f"pow({self.base.to_text()}, {self.exponent})"


@dataclass(frozen=True, eq=True)
class BumpMap(GroupField):
    """Degree-one collapse map onto one su(2) factor.

    ``u = cos rho + v_hat sin rho`` with ``v = x - centre``,
    ``rho = pi * bump(|v|, r0, r1)``; other factors are the identity. It is
    identically -1 near the centre and identically 1 for ``|v| >= r1``.
    ``smoothness`` is the order of contact of the cutoff at both ends of
    the transition; raising it speeds up spectral convergence of integrals
    that are not topological, at the cost of a steeper profile.
    """

    spec: LieAlgebraSpec
    r0: float
    r1: float
    factor: int = 0
    smoothness: int = BUMP_SMOOTHNESS

    def __post_init__(self):
        if not 0 < self.r0 < self.r1 < math.pi:
            raise GroupFieldError("bumpmap needs 0 < r0 < r1 < pi")
        if int(self.smoothness) != self.smoothness or self.smoothness < 2:
            raise GroupFieldError("bumpmap smoothness must be an integer >= 2")
        if self.spec.factors[self.factor] != SU2:
            raise GroupFieldError("bumpmap targets an su2 factor")

    def at(self, points, order: int = 2):
        points = _check_points(points)
        P, n = points.shape
        r = Radial().jet(points, 0)
        live = r.val > self.r0
        # evaluate only away from the centre, where r is smooth
        safe = np.where(live[:, None], points, math.pi + self.r1)
        r = Radial().jet(safe, 2)
        f0, f1, f2 = bump_profile(r.val, self.r0, self.r1, int(self.smoothness))
        rho = Jet(f0, f1 * r.d1, f2 * r.d1[:, None] * r.d1[None, :] + f1 * r.d2) * math.pi
        v = _concat([Jet.coordinate(safe, a).linear(lambda x: x[..., None]) - math.pi for a in range(n)])
        w = rho.cos()
        s = rho.sin() * r.reciprocal()
        q = _concat([w.linear(lambda a: a[..., None]), Jet.bilinear(s, v, lambda a, b: a[..., None] * b)])
        if n != 3:
            raise GroupFieldError("bumpmap is defined on T^3")
        mask = live[:, None]
        minus_one = np.array([-1.0, 0.0, 0.0, 0.0])
        q = Jet(np.where(mask, q.val, minus_one), np.where(mask, q.d1, 0.0), np.where(mask, q.d2, 0.0))
        parts = []
        for k, (f, s_) in enumerate(zip(self.spec.factors, self.spec.group_slices)):
            if k == self.factor:
                parts.append(q)
            else:
                e = np.zeros(s_.stop - s_.start)
                e[0] = 1.0
                parts.append(Jet.constant(np.broadcast_to(e, (P, len(e))).copy(), n))
        return _concat(parts).truncate(order)

    def to_text(self):
        extra = f", {self.factor}" if self.factor or self.smoothness != BUMP_SMOOTHNESS else ""
        if self.smoothness != BUMP_SMOOTHNESS:
            extra += f", {int(self.smoothness)}"
        return f"bumpmap({_fmt(self.r0)}, {_fmt(self.r1)}{extra})"


@dataclass(frozen=True, eq=False)
class JetGroupField(GroupField):
    """Group field given directly by a jet-valued callable (charts, generated fields)."""

    spec: LieAlgebraSpec
    fn: Callable
    label: str = "<generated>"

    def at(self, points, order: int = 2):
        return self.fn(_check_points(points)).truncate(order)

    def to_text(self):
        return self.label


def adjoint_jet(spec: LieAlgebraSpec, g: Jet, X: Jet) -> Jet:
    """``Ad_g X`` for jets of a group element and an algebra element."""
    gx = Jet.bilinear(g, X.linear(spec.embed), spec.raw_mul)
    return Jet.bilinear(gx, jet_conj(spec, g), lambda a, b: spec.project(spec.raw_mul(a, b)))


# -- Maurer-Cartan pullbacks -----------------------------------------------------------

def mc_pullback(u: GroupField, n: int = 3) -> VForm:
    """``u*theta = u^{-1} du`` as an algebra-valued 1-form."""
    spec = u.spec

    def ev(points, order):
        return mc_jet(spec, u.at(points, order + 1))

    return VForm(n, 1, (spec.dim,), ev, spec)


def mc_jet(spec: LieAlgebraSpec, g: Jet) -> Jet:
    """Slots ``(P, n, dim)`` of ``g^{-1} dg`` from a group jet (one order lower)."""
    ginv = jet_conj(spec, g).truncate(1)
    cols = [Jet.bilinear(ginv, g.partial(a), lambda x, y: spec.project(spec.raw_mul(x, y))) for a in range(g.d1.shape[0])]
    return _stack_slots(cols)


def _stack_slots(cols: list[Jet]) -> Jet:
    order = min(c.order for c in cols)
    cols = [c.truncate(order) for c in cols]
    st = lambda xs: np.stack(xs, axis=-2)
    return Jet(st([c.val for c in cols]), st([c.d1 for c in cols]) if order >= 1 else None,
               st([c.d2 for c in cols]) if order >= 2 else None)


def mc_three_form_pullback(u: GroupField, spec: LieAlgebraSpec | None = None, n: int = 3) -> VForm:
    """``u*Theta = -(1/6) <u*theta ^ [u*theta ^ u*theta]>`` with the scales of ``spec``."""
    spec = spec or u.spec
    if n < 3:
        raise GroupFieldError("the Maurer-Cartan 3-form needs n >= 3")
    theta = mc_pullback(u, n)
    theta = VForm(n, 1, theta.vshape, theta._eval, spec)
    return inner_wedge(theta, bracket_wedge(theta, theta)) * (-1.0 / 6.0)


def theta_on_vectors(spec: LieAlgebraSpec, X, Y, Z) -> float:
    """``Theta(X, Y, Z)`` for left-trivialised tangent vectors (algebra elements)."""
    # expand the determinant-convention wedge on three vectors directly
    def ip(a, b, c):
        return spec.inner(a, spec.bracket(b, c))

    perms = [((X, Y, Z), 1), ((Y, Z, X), 1), ((Z, X, Y), 1), ((Y, X, Z), -1), ((X, Z, Y), -1), ((Z, Y, X), -1)]
    # <theta ^ [theta ^ theta]>(X, Y, Z) sums over all permutations with sign
    return float(-sum(sign * ip(*p) for p, sign in perms) / 6.0)


# -- Haar integration and normalisation ------------------------------------------------------

HAAR_NODES = 64


def _hopf_chart(eta, xi1, xi2):
    return np.stack([np.cos(eta) * np.cos(xi1), np.cos(eta) * np.sin(xi1),
                     np.sin(eta) * np.cos(xi2), np.sin(eta) * np.sin(xi2)], axis=-1)


def _chart_nodes(nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    eta = (x + 1.0) * math.pi / 4.0
    w_eta = w * math.pi / 4.0
    xi = TWO_PI * np.arange(nodes) / nodes
    E, A, B = np.meshgrid(eta, xi, xi, indexing="ij")
    W = np.broadcast_to(w_eta[:, None, None], E.shape) * (TWO_PI / nodes) ** 2
    return np.stack([E.ravel(), A.ravel(), B.ravel()], axis=-1), W.ravel()


def haar_integral(f: Callable[[np.ndarray], np.ndarray], nodes: int = HAAR_NODES) -> float:
    """Integral over the unit 3-sphere with its round volume element.

    Uses the chart ``(cos e cos a, cos e sin a, sin e cos b, sin e sin b)``
    with Jacobian ``sin e cos e``: Gauss-Legendre in ``e``, rectangle rule in
    the two angles. ``f`` maps quaternions ``(P, 4)`` to ``P`` values.
    """
    pts, W = _chart_nodes(nodes)
    jac = np.sin(pts[:, 0]) * np.cos(pts[:, 0])
    vals = map_chunks(lambda p: np.asarray(f(_hopf_chart(p[:, 0], p[:, 1], p[:, 2])), float), pts)
    return compensated_sum(vals * jac * W)


def _chart_field() -> GroupField:
    spec = LieAlgebraSpec.su2()

    def fn(points):
        e, a, b = (Jet.coordinate(points, k) for k in range(3))
        return _concat([(e.cos() * a.cos()).linear(lambda v: v[..., None]), (e.cos() * a.sin()).linear(lambda v: v[..., None]),
                        (e.sin() * b.cos()).linear(lambda v: v[..., None]), (e.sin() * b.sin()).linear(lambda v: v[..., None])])

    return JetGroupField(spec, fn, "hopf-chart")


def theta_sphere_integral(scale: float = 1.0, nodes: int = HAAR_NODES) -> float:
    """Integral of ``Theta`` over S^3 (standard (i, j, k) orientation) via the chart pullback.

    The pulled-back 3-form is evaluated by the generic Maurer-Cartan code and
    weighted with the chart's orientation sign ``sign det(q^{-1} dq)``.
    """
    chart = _chart_field()
    spec = LieAlgebraSpec.su2(scale)
    theta3 = mc_three_form_pullback(chart, spec, n=3)
    mc = mc_pullback(chart, 3)
    pts, W = _chart_nodes(nodes)

    def density(p):
        dens = theta3.at(p, 0).val[:, 0]
        frame = mc.at(p, 0).val  # (P, 3 slots, 3 algebra coords)
        return dens * np.sign(np.linalg.det(frame))

    vals = map_chunks(density, pts)
    return compensated_sum(vals * W)


@dataclass(frozen=True)
class MaurerCartanData:
    """Derived normalisation: volume of S^3, the integral of Theta at scale 1, and lambda*."""

    volume: float
    theta_integral: float
    theta_integral_chart: float
    nodes: int

    @property
    def lambda_star(self) -> float:
        return -1.0 / self.theta_integral

    def as_dict(self) -> dict:
        return {"volume_s3": self.volume, "theta_integral": self.theta_integral,
                "theta_integral_chart": self.theta_integral_chart, "lambda_star": self.lambda_star,
                "nodes": self.nodes}


def maurer_cartan_data(nodes: int = HAAR_NODES) -> MaurerCartanData:
    vol = haar_integral(lambda q: np.ones(len(q)), nodes)
    # Theta = -2 lambda times the round volume form (bi-invariance), at lambda = 1
    frame = theta_on_vectors(LieAlgebraSpec.su2(), [1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0])
    theta_int = frame * vol
    chart = theta_sphere_integral(1.0, nodes)
    return MaurerCartanData(vol, theta_int, chart, nodes)


def normalization_constant(spec: LieAlgebraSpec, nodes: int = HAAR_NODES) -> list[float | None]:
    """Per-factor ``lambda*``; ``None`` for u(1) factors, which carry no 3-form."""
    data = maurer_cartan_data(nodes)
    return [data.lambda_star if f == SU2 else None for f in spec.factors]


# -- degrees ---------------------------------------------------------------------------------

def degree_trivial(u: GroupField, spec: LieAlgebraSpec | None = None, N: int = 32) -> float:
    """``int_{T^3} u*Theta`` for a strictly periodic field (use normalised scales for integers)."""
    spec = spec or LieAlgebraSpec.normalized(u.spec.factors)
    if getattr(u, "twisted", False):
        raise GroupFieldError("twisted field: use flat.degree_flat")
    form = mc_three_form_pullback(u, spec, 3)
    vals = map_chunks(lambda p: form.at(p, 0).val[:, 0], grid_points(3, N))
    return compensated_sum(vals) * (TWO_PI / N) ** 3


@dataclass
class OracleResult:
    degree: int
    preimages: np.ndarray
    signs: np.ndarray
    min_abs_det: float
    seeds: int = field(default=0)


def _torus_dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for p in points:
        if not any(np.linalg.norm((p - q + math.pi) % TWO_PI - math.pi) < tol for q in kept):
            kept.append(p)
    return np.array(kept).reshape(-1, 3)


def brouwer_degree_oracle(u: GroupField, regular_value, factor: int = 0, seeds_per_axis: int = 16,
                          iters: int = 60, det_tol: float = 1e-6, dedupe_tol: float = 1e-4) -> OracleResult:
    """Count preimages of ``regular_value`` with orientation signs.

    Newton's method on ``log(q^{-1} u(x)) = 0`` using the left-trivialised
    Jacobian ``u^{-1} du``, seeded on a uniform grid. The sign of a preimage
    is ``sign(-det J)``, which is the orientation in which Theta is positive.
    """
    spec = u.spec
    gs = spec.group_slices[factor]
    asl = spec.algebra_slices[factor]
    if spec.factors[factor] != SU2:
        raise OracleError("the oracle targets an su2 factor")
    q = np.asarray(regular_value, float)
    q = q / np.linalg.norm(q)
    qinv = q * np.array([1.0, -1.0, -1.0, -1.0])
    factor_spec = LieAlgebraSpec.su2()

    def residual_and_jac(x):
        g = u.at(x, 1)
        y = factor_spec.log(factor_spec.raw_mul(qinv, g.val[:, gs]))
        J = np.transpose(mc_jet(spec, g).val[:, :, asl], (0, 2, 1))  # (P, algebra, coordinate)
        return y, J

    x = grid_points(3, seeds_per_axis) + math.pi / seeds_per_axis
    alive = np.ones(len(x), bool)
    for _ in range(iters):
        idx = np.nonzero(alive)[0]
        if len(idx) == 0:
            break
        try:
            y, J = residual_and_jac(x[idx])
        except Exception:
            y, J = _safe_eval(residual_and_jac, x[idx])
        det = np.linalg.det(J)
        ok = np.abs(det) > 1e-10
        alive[idx[~ok]] = False
        idx, y, J = idx[ok], y[ok], J[ok]
        step = np.linalg.solve(J, y[..., None])[..., 0]
        norm = np.linalg.norm(step, axis=1, keepdims=True)
        step = np.where(norm > 0.5, step * 0.5 / np.maximum(norm, 1e-300), step)
        x[idx] = (x[idx] - step) % TWO_PI
    y, J = _safe_eval(residual_and_jac, x)
    res = np.linalg.norm(y, axis=1)
    converged = alive & (res < 1e-11)
    stalled = alive & (res >= 1e-11) & (res < 1e-3)
    if np.any(stalled):
        raise OracleError("pick another regular value: Newton stalled near a preimage")
    roots = _torus_dedupe(x[converged], dedupe_tol)
    if len(roots) == 0:
        return OracleResult(0, roots, np.zeros(0), math.inf, len(x))
    _, J = residual_and_jac(roots)
    det = np.linalg.det(J)
    if np.min(np.abs(det)) < det_tol:
        raise OracleError("pick another regular value: near-singular Jacobian at a preimage")
    signs = np.sign(-det).astype(int)
    return OracleResult(int(signs.sum()), roots, signs, float(np.min(np.abs(det))), len(x))


def _safe_eval(fn, x):
    # evaluate point by point, marking cut-locus failures with a huge residual
    ys, Js = [], []
    for p in x:
        try:
            y, J = fn(p[None])
        except ValueError:
            y, J = np.full((1, 3), 1e3), np.zeros((1, 3, 3))
        ys.append(y[0])
        Js.append(J[0])
    return np.array(ys), np.array(Js)
