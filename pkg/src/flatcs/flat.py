"""Flat bundles over T^3 presented by commuting holonomies, and twisted fields.

A bundle is glued from ``R^3 x G`` by ``(x + 2 pi e_k, g) ~ (x, h_k g)``.
In this gauge the zero connection is flat with holonomy ``h_k`` around the
k-th cycle, and sections of the associated bundles are fields obeying::

    a(x + 2 pi e_k) = Ad_{h_k^-1} a(x)          algebra fields, gauge fields
    u(x + 2 pi e_k) = h_k^-1 u(x) h_k            gauge transformations

Holonomies are required to lie in a common maximal torus:
``h_k = g exp(phi_k i) g^-1`` on each su(2) factor. In the rotated frame
``Ad_{g^-1}`` the ``i`` part of a twisted field is periodic and
``z = a_j + i a_k`` picks up ``exp(-2 i phi_k)``, which is realised with
frequencies shifted by ``-phi_k / pi``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .expr import TrigSeries
from .forms import VForm
from .gauge import (
    CSContext,
    covariant_mc_form,
    cs_functional,
    gauge_act,
    residual_flat_gauge_change_density,
    sample_points,
    theta_three_form,
    zero_connection,
)
from .groupfields import GroupField, QExp
from .jets import TWO_PI, compensated_sum, concatenate, grid_points, map_chunks, stack
from .lie import SU2, U1, LieAlgebraSpec

COMMUTE_TOL = 1e-12
TORAL_TOL = 1e-10
TWIST_TOL = 1e-8


class HolonomyError(ValueError):
    pass


class TwistingError(ValueError):
    pass


class FlatSearchError(RuntimeError):
    """Raised when the flat-connection search stops above tolerance."""

    def __init__(self, message: str, residual: float, iterate: "TwistedFourierGauge"):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate


# -- holonomy -------------------------------------------------------------------------

def _axis_frame(axis: np.ndarray) -> np.ndarray:
    """Unit quaternion ``g`` with ``g i g^-1 = axis`` (a unit pure quaternion)."""
    i = np.array([1.0, 0.0, 0.0])
    c = float(np.dot(i, axis))
    if c < -1.0 + 1e-15:
        return np.array([0.0, 0.0, 1.0, 0.0])  # rotation by pi about j
    # half-angle formula for the rotation taking i to axis
    q = np.concatenate([[1.0 + c], np.cross(i, axis)])
    return q / np.linalg.norm(q)


@dataclass(frozen=True)
class HolonomyData:
    """Three commuting group elements ``(h_1, h_2, h_3)``."""

    spec: LieAlgebraSpec
    elements: tuple

    def __post_init__(self):
        h = np.asarray(self.elements, float).reshape(-1, self.spec.group_dim)
        if len(h) != 3:
            raise HolonomyError("a flat bundle over T^3 needs three holonomies")
        h = self.spec.renormalize(h)
        object.__setattr__(self, "elements", tuple(tuple(r) for r in h.tolist()))
        for a in range(3):
            for b in range(a + 1, 3):
                diff = self.spec.raw_mul(h[a], h[b]) - self.spec.raw_mul(h[b], h[a])
                if np.max(np.abs(diff)) > COMMUTE_TOL:
                    raise HolonomyError(f"holonomies h{a + 1} and h{b + 1} do not commute")
        self.maximal_torus  # validates

    @classmethod
    def trivial(cls, spec: LieAlgebraSpec) -> "HolonomyData":
        return cls(spec, tuple(tuple(spec.identity()) for _ in range(3)))

    @classmethod
    def toral(cls, spec: LieAlgebraSpec, angles, frame=None) -> "HolonomyData":
        """``h_k = g exp(angles[k] i) g^-1`` per factor; ``angles`` has shape (3, factors)."""
        angles = np.asarray(angles, float).reshape(3, len(spec.factors))
        frame = spec.identity() if frame is None else np.asarray(frame, float)
        rows = []
        for k in range(3):
            X = np.concatenate([np.array([t] + ([0.0, 0.0] if f == SU2 else []))
                                for t, f in zip(angles[k], spec.factors)])
            e = spec.exp(X)
            rows.append(spec.mul(spec.mul(frame, e), spec.inv(frame)))
        return cls(spec, tuple(tuple(r) for r in rows))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.elements)

    @property
    def is_trivial(self) -> bool:
        return bool(np.allclose(self.array, self.spec.identity(), atol=1e-15, rtol=0))

    @property
    def maximal_torus(self) -> tuple[np.ndarray, np.ndarray]:
        """Common frame ``g`` (group element) and angles ``phi`` of shape (3, factors)."""
        spec, h = self.spec, self.array
        frames, phis = [], np.zeros((3, len(spec.factors)))
        for f_idx, (f, s) in enumerate(zip(spec.factors, spec.group_slices)):
            block = h[:, s]
            if f == U1:
                frames.append(np.array([1.0, 0.0]))
                phis[:, f_idx] = np.arctan2(block[:, 1], block[:, 0])
                continue
            v = block[:, 1:]
            norms = np.linalg.norm(v, axis=1)
            k = int(np.argmax(norms))
            axis = v[k] / norms[k] if norms[k] > TORAL_TOL else np.array([1.0, 0.0, 0.0])
            g = _axis_frame(axis)
            frames.append(g)
            phis[:, f_idx] = np.arctan2(v @ axis, block[:, 0])
            rebuilt = np.stack([np.cos(phis[:, f_idx])] + [np.sin(phis[:, f_idx]) * axis[c] for c in range(3)], axis=1)
            if np.max(np.abs(rebuilt - block)) > TORAL_TOL:
                raise HolonomyError("holonomy not in a common maximal torus")
        return np.concatenate(frames), phis

    @property
    def frame(self) -> np.ndarray:
        return self.maximal_torus[0]

    @property
    def angles(self) -> np.ndarray:
        return self.maximal_torus[1]

    def shifts(self) -> np.ndarray:
        """Frequency shift per axis for the complex channel of each factor, shape (3, factors)."""
        return -self.angles / math.pi

    def split(self) -> list:
        return [self.spec.split(np.array(h), kind="group") for h in self.elements]


# -- twisted fields --------------------------------------------------------------------

def twisted_algebra_jet(spec: LieAlgebraSpec, holonomy: HolonomyData, channels: Sequence[TrigSeries]):
    """Evaluator for ``Ad_g`` of toral-frame channels.

    ``channels`` lists per algebra coordinate the toral-frame scalar fields:
    the u(1) value, or for su(2) the periodic ``i`` part followed by the
    ``j`` and ``k`` parts of the shifted complex channel.
    """
    frame = holonomy.frame

    def ev(points, order):
        cols = [c.jet(points, order).linear(lambda a: a[..., None]) for c in channels]
        return concatenate(cols, axis=-1).linear(lambda a: spec.adjoint(frame, a))

    return ev


def complex_channel(freqs, coef) -> tuple[TrigSeries, TrigSeries]:
    """Real and imaginary parts of ``sum_m coef_m exp(i freqs_m . x)`` as trig series."""
    coef = np.asarray(coef, complex)
    re = TrigSeries(freqs, coef.real, -coef.imag)
    im = TrigSeries(freqs, coef.imag, coef.real)
    return re, im


def random_channels(spec: LieAlgebraSpec, holonomy: HolonomyData, rng: np.random.Generator,
                    bandwidth: int = 1, amplitude: float = 0.5) -> list[TrigSeries]:
    shifts = holonomy.shifts()
    out = []
    for f_idx, f in enumerate(spec.factors):
        out.append(TrigSeries.random(3, bandwidth, rng, amplitude))
        if f == SU2:
            base = TrigSeries.random(3, bandwidth, rng, amplitude, shift=shifts[:, f_idx])
            coef = base.cos_coef + 1j * base.sin_coef
            out.extend(complex_channel(base.freqs, coef))
    return out


@dataclass
class TwistedField:
    """A field together with the holonomy its twisting law refers to.

    ``kind`` is ``"algebra"`` (algebra-valued 0-form), ``"gauge"``
    (algebra-valued 1-form) or ``"group"`` (gauge transformation).
    """

    carrier: object
    holonomy: HolonomyData
    kind: str

    def __post_init__(self):
        if self.kind not in ("algebra", "gauge", "group"):
            raise TwistingError(f"unknown twisted-field kind {self.kind!r}")

    @property
    def twisted(self) -> bool:
        return not self.holonomy.is_trivial

    @property
    def spec(self) -> LieAlgebraSpec:
        return self.carrier.spec


def make_twisted_algebra_field(holonomy: HolonomyData, rng: np.random.Generator, bandwidth: int = 1,
                               amplitude: float = 0.5, channels=None) -> TwistedField:
    spec = holonomy.spec
    channels = channels or random_channels(spec, holonomy, rng, bandwidth, amplitude)
    form = VForm(3, 0, (spec.dim,), _as_form_eval(twisted_algebra_jet(spec, holonomy, channels)), spec)
    return TwistedField(form, holonomy, "algebra")


def _as_form_eval(ev):
    return lambda p, o: ev(p, o).linear(lambda a: a[..., None, :])


def make_twisted_gauge_field(holonomy: HolonomyData, rng: np.random.Generator, bandwidth: int = 1,
                             amplitude: float = 0.5) -> TwistedField:
    spec = holonomy.spec
    comps = [twisted_algebra_jet(spec, holonomy, random_channels(spec, holonomy, rng, bandwidth, amplitude))
             for _ in range(3)]

    def ev(points, order):
        return stack([c(points, order) for c in comps], axis=-2)

    return TwistedField(VForm(3, 1, (spec.dim,), ev, spec), holonomy, "gauge")


def make_twisted_group_field(a: TwistedField) -> TwistedField:
    """``u = exp(a)`` for a twisted algebra field ``a``."""
    if a.kind != "algebra":
        raise TwistingError("exponentiate an algebra-valued twisted field")
    spec = a.spec
    form = a.carrier
    u = QExp(spec, lambda p, o: form.at(p, o).linear(lambda v: v[..., 0, :]))
    return TwistedField(u, a.holonomy, "group")


def boundary_points(count: int = 64, seed: int = 0) -> list[np.ndarray]:
    """Per axis k, random points on the face ``x_k = 0``."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(3):
        p = rng.uniform(0.0, TWO_PI, size=(count, 3))
        p[:, k] = 0.0
        out.append(p)
    return out


def _values(f, points) -> np.ndarray:
    if isinstance(f, GroupField):
        return f.at(points, 0).val
    return f.at(points, 0).val


def validate_twisting(f: TwistedField, count: int = 64, seed: int = 0) -> float:
    """Max over boundary samples of the twisting-law residual."""
    spec, h = f.spec, f.holonomy.array
    worst = 0.0
    for k, p in enumerate(boundary_points(count, seed)):
        shifted = p.copy()
        shifted[:, k] += TWO_PI
        here, there = _values(f.carrier, p), _values(f.carrier, shifted)
        hinv = spec.inv(h[k])
        if f.kind == "group":
            expected = spec.raw_mul(spec.raw_mul(hinv, here), h[k])
        else:
            expected = spec.adjoint(hinv, here)
        worst = max(worst, float(np.max(np.abs(there - expected))))
    return worst


def periodicity_residual(form: VForm, count: int = 64, seed: int = 0) -> float:
    """Max boundary mismatch ``|omega(x + 2 pi e_k) - omega(x)|``."""
    worst = 0.0
    for k, p in enumerate(boundary_points(count, seed)):
        shifted = p.copy()
        shifted[:, k] += TWO_PI
        worst = max(worst, float(np.max(np.abs(form.at(shifted, 0).val - form.at(p, 0).val))))
    return worst


# -- flat context and degrees ----------------------------------------------------------

@dataclass
class FlatContext:
    """Holonomy, a flat reference connection (zero by default), normalised scales, grid."""

    holonomy: HolonomyData
    grid: int = 32
    reference: VForm | None = None
    spec: LieAlgebraSpec | None = None

    def __post_init__(self):
        if self.spec is None:
            self.spec = LieAlgebraSpec.normalized(self.holonomy.spec.factors)
        if self.reference is None:
            self.reference = zero_connection(3, self.spec)

    def toral_reference(self, c: float, axis: int = 0, factor: int = 0) -> "FlatContext":
        """Same bundle with the constant flat reference ``c Ad_g(i) dx_axis``."""
        spec = self.holonomy.spec
        X = np.zeros(spec.dim)
        s = spec.algebra_slices[factor]
        X[s.start] = c
        X = spec.adjoint(self.holonomy.frame, X)
        values = np.zeros((3, spec.dim))
        values[axis] = X
        ref = VForm.constant(3, 1, values, self.spec)
        return FlatContext(self.holonomy, self.grid, ref, self.spec)

    def cs_context(self) -> CSContext:
        return CSContext(self.spec, 3, self.reference, self.grid)


def holonomy_of(A: VForm, holonomy: HolonomyData, k: int, base=None, steps: int = 256) -> np.ndarray:
    """Holonomy around the k-th cycle: ``h_k`` times the path-ordered ``exp(-int A)``.

    Midpoint rule: ``g <- exp(-A(x_mid)(e_k) dt) g`` along ``x(t) = base + t e_k``.
    """
    spec = holonomy.spec
    base = np.zeros(3) if base is None else np.asarray(base, float)
    dt = TWO_PI / steps
    mids = base + np.outer((np.arange(steps) + 0.5) * dt, np.eye(3)[k])
    a = A.at(mids, 0).val[:, k, :]  # component along e_k
    g = spec.identity()
    for X in a:
        g = spec.mul(spec.exp(-X * dt), g)
    return spec.mul(holonomy.array[k], g)


def _group_carrier(u) -> tuple[GroupField, HolonomyData | None]:
    if isinstance(u, TwistedField):
        if u.kind != "group":
            raise TwistingError("expected a group-valued twisted field")
        return u.carrier, u.holonomy
    return u, None


def degree_density(u, ctx: FlatContext) -> VForm:
    """``Theta`` of the Maurer-Cartan form measured against the flat reference."""
    carrier, _ = _group_carrier(u)
    ref = ctx.reference
    theta = covariant_mc_form(carrier, VForm(3, 1, ref.vshape, ref._eval, ctx.spec))
    return theta_three_form(theta)


def degree_flat(u, ctx: FlatContext, check: bool = True) -> float:
    """``int_{T^3} u*Theta`` for a twisted gauge transformation, with ``lambda = lambda*``."""
    carrier, hol = _group_carrier(u)
    if check:
        if hol is not None and not np.allclose(hol.array, ctx.holonomy.array, atol=1e-12, rtol=0):
            raise TwistingError("field and context use different holonomies")
        res = validate_twisting(TwistedField(carrier, ctx.holonomy, "group"))
        if res > TWIST_TOL:
            raise TwistingError(f"gauge transformation violates the twisting law (residual {res:.3g})")
    form = degree_density(carrier, ctx)
    vals = map_chunks(lambda p: form.at(p, 0).val[:, 0], grid_points(3, ctx.grid))
    return compensated_sum(vals) * (TWO_PI / ctx.grid) ** 3


@dataclass
class GaugeChangeCheck:
    lhs: float
    rhs: float
    difference: float
    density_residual: float
    cs_before: float
    cs_after: float

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def gauge_change_check(A, u, ctx: FlatContext, points=None) -> GaugeChangeCheck:
    """``CS(phi*A) - CS(A)`` against the degree, plus the pointwise density identity."""
    A_form = A.carrier if isinstance(A, TwistedField) else A
    carrier, _ = _group_carrier(u)
    cctx = ctx.cs_context()
    before = cs_functional(A_form, cctx)
    after = cs_functional(gauge_act(carrier, A_form), cctx)
    deg = degree_flat(u, ctx)
    points = sample_points(3) if points is None else points
    A_spec = cctx.with_spec(A_form)
    ref = cctx.with_spec(ctx.reference)
    density = residual_flat_gauge_change_density(A_spec, carrier, ref, points)
    return GaugeChangeCheck(after - before, deg, abs(after - before - deg), density, before, after)


# -- flat-connection search -----------------------------------------------------------------

@dataclass
class FlatOptions:
    tol: float = 1e-10
    max_iters: int = 10_000
    bandwidth: int = 4
    grid: int | None = None
    initial_step: float = 1.0
    armijo: float = 1e-4
    method: str = "auto"  # "gradient", "newton" (abelian only) or "auto"
    log: list = field(default_factory=list)


class TwistedFourierGauge:
    """A twisted gauge field stored as Fourier coefficients in the toral frame.

    ``coef`` has shape ``(3 components, channels, M, M, M)`` (complex) with
    modes ``m in [-B, B]^3``. Channel ``c`` evaluates to
    ``z_c = sum_m coef[.., c, m] exp(i (m + theta_c) . x)``; real channels
    (u(1) values and su(2) ``i`` parts) take ``Re z``, the su(2) complex
    channel gives the ``j`` and ``k`` parts as ``Re z`` and ``Im z``.
    """

    def __init__(self, holonomy: HolonomyData, bandwidth: int = 4, coef=None, spec: LieAlgebraSpec | None = None):
        self.holonomy = holonomy
        self.spec = spec or LieAlgebraSpec.normalized(holonomy.spec.factors)
        self.B = int(bandwidth)
        shifts = holonomy.shifts()
        self.channel_shift, self.channel_kind, self.channel_factor = [], [], []
        for f_idx, f in enumerate(holonomy.spec.factors):
            self.channel_shift.append(np.zeros(3))
            self.channel_kind.append("real")
            self.channel_factor.append(f_idx)
            if f == SU2:
                self.channel_shift.append(shifts[:, f_idx])
                self.channel_kind.append("complex")
                self.channel_factor.append(f_idx)
        M = 2 * self.B + 1
        shape = (3, len(self.channel_kind), M, M, M)
        self.coef = np.zeros(shape, complex) if coef is None else np.asarray(coef, complex).reshape(shape)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.B, self.B + 1)

    def copy(self, coef=None) -> "TwistedFourierGauge":
        return TwistedFourierGauge(self.holonomy, self.B, self.coef.copy() if coef is None else coef, self.spec)

    # -- synthesis --------------------------------------------------------------

    def _freqs(self, c: int) -> list[np.ndarray]:
        return [self.modes + self.channel_shift[c][j] for j in range(3)]

    def _E(self, N: int, c: int) -> list[np.ndarray]:
        """Per axis the ``(N, M)`` matrix ``exp(i x_n f_m)`` on the N-point grid."""
        return [_fourier_matrix(N, self.B, float(t)) for t in self.channel_shift[c]]

    def default_grid(self) -> int:
        return 4 * self.B + 2

    def _derivative_stack(self, C: np.ndarray, c: int, sign: float = 1.0) -> np.ndarray:
        """``(..., 4, M, M, M)``: the coefficients and their three partial-derivative multiples."""
        f = self._freqs(c)
        parts = [C] + [C * _axis_factor(sign * 1j * f[b], b) for b in range(3)]
        return np.stack(parts, axis=-4)

    @staticmethod
    def _separable(S: np.ndarray, E: list[np.ndarray]) -> np.ndarray:
        """Apply ``E[0] (x) E[1] (x) E[2]`` to the last three axes of ``S``."""
        for e in E:
            S = np.tensordot(S, e, axes=([-3], [1]))  # contracted axis leaves, new axis appended
        return S

    def _channel_values(self, N: int) -> list[np.ndarray]:
        """Per channel, complex values ``(3 components, 4, N, N, N)``: z and its partials."""
        return [self._separable(self._derivative_stack(self.coef[:, c], c), self._E(N, c))
                for c in range(len(self.channel_kind))]

    def _assemble(self, chans, N):
        """Algebra-coordinate arrays ``A[a]`` and ``dA[a][b]`` of shape (N, N, N, dim) in the toral frame."""
        dim = self.holonomy.spec.dim
        A = np.zeros((3, N, N, N, dim))
        dA = np.zeros((3, 3, N, N, N, dim))
        col = 0
        for c, kind in enumerate(self.channel_kind):
            z = chans[c]
            A[..., col] = z[:, 0].real
            dA[..., col] = z[:, 1:].real
            if kind == "complex":
                A[..., col + 1] = z[:, 0].imag
                dA[..., col + 1] = z[:, 1:].imag
            col += 1 if kind == "real" else 2
        return A, dA

    def curvature_grid(self, N: int | None = None):
        N = N or self.default_grid()
        spec = self.holonomy.spec
        A, dA = self._assemble(self._channel_values(N), N)
        F = {}
        for a in range(3):
            for b in range(a + 1, 3):
                F[(a, b)] = dA[b, a] - dA[a, b] + spec.bracket(A[a], A[b])
        return A, dA, F

    def _residual_from(self, F, N) -> float:
        # plain pairwise summation: single-threaded here, so still reproducible, and the
        # line search calls this several times per iteration
        metric = np.diag(self.spec.metric())
        total = sum(float(np.sum(Fab * Fab * metric)) for Fab in F.values())
        return total * (TWO_PI / N) ** 3

    def residual(self, N: int | None = None) -> float:
        """``R = int sum_{a<b} <F_ab, F_ab>`` (exact on the default grid)."""
        N = N or self.default_grid()
        _, _, F = self.curvature_grid(N)
        return self._residual_from(F, N)

    def gradient(self, N: int | None = None) -> tuple[float, np.ndarray]:
        """Residual and its gradient with respect to the complex coefficients."""
        N = N or self.default_grid()
        spec = self.holonomy.spec
        A, dA, F = self.curvature_grid(N)
        h3 = (TWO_PI / N) ** 3
        R = self._residual_from(F, N)
        metric = np.diag(self.spec.metric())
        gA = np.zeros_like(A)  # sensitivity of R to A[a]
        gdA = np.zeros_like(dA)  # sensitivity of R to dA[a, b] = d_b A_a
        for (a, b), Fab in F.items():
            G = 2.0 * h3 * Fab * metric
            gdA[b, a] += G
            gdA[a, b] -= G
            # <G, [A_a, A_b]>: perturbing A_a gives [dA_a, A_b], perturbing A_b gives [A_a, dA_b]
            gA[a] += _bracket_adjoint_left(spec, G, A[b])
            gA[b] += _bracket_adjoint_right(spec, G, A[a])
        return R, self._coef_adjoint(gA, gdA, N)

    def _coef_adjoint(self, gA, gdA, N):
        grad = np.zeros_like(self.coef)
        col = 0
        for c, kind in enumerate(self.channel_kind):
            # sensitivities (3 components, 4, N, N, N): value then the three partials
            s = np.concatenate([gA[:, None, ..., col], gdA[..., col]], axis=1).astype(complex)
            if kind == "complex":
                s = s + 1j * np.concatenate([gA[:, None, ..., col + 1], gdA[..., col + 1]], axis=1)
            back = self._separable(s, [e.conj().T.copy() for e in self._E(N, c)])  # (3, 4, M, M, M)
            f = self._freqs(c)
            grad[:, c] = back[:, 0] + sum(back[:, 1 + b] * _axis_factor(-1j * f[b], b) for b in range(3))
            col += 1 if kind == "real" else 2
        return grad

    # -- conversion -------------------------------------------------------------------

    def channels(self, a: int) -> list[TrigSeries]:
        """Toral-frame trig series for component ``a`` (per algebra coordinate)."""
        out = []
        grid = np.array(np.meshgrid(self.modes, self.modes, self.modes, indexing="ij")).reshape(3, -1).T
        for c, kind in enumerate(self.channel_kind):
            freqs = grid + self.channel_shift[c]
            re, im = complex_channel(freqs, self.coef[a, c].ravel())
            out.extend([re] if kind == "real" else [re, im])
        return out

    def to_form(self) -> VForm:
        comps = [twisted_algebra_jet(self.holonomy.spec, self.holonomy, self.channels(a)) for a in range(3)]

        def ev(points, order):
            return stack([c(points, order) for c in comps], axis=-2)

        return VForm(3, 1, (self.holonomy.spec.dim,), ev, self.spec)

    def to_twisted(self) -> TwistedField:
        return TwistedField(self.to_form(), self.holonomy, "gauge")

    @classmethod
    def project(cls, form: VForm, holonomy: HolonomyData, bandwidth: int = 4, N: int | None = None) -> "TwistedFourierGauge":
        """Least-squares projection of a twisted gauge field onto the coefficient space."""
        out = cls(holonomy, bandwidth)
        N = N or 2 * bandwidth + 2
        pts = grid_points(3, N)
        vals = form.at(pts, 0).val.reshape(N, N, N, 3, -1)
        toral = holonomy.spec.adjoint(holonomy.spec.inv(holonomy.frame), vals)
        col = 0
        for c, kind in enumerate(out.channel_kind):
            Einv = [e.conj().T.copy() for e in out._E(N, c)]
            z = toral[..., col] if kind == "real" else toral[..., col] + 1j * toral[..., col + 1]
            out.coef[:, c] = out._separable(np.moveaxis(z, -1, 0), Einv) / N**3
            col += 1 if kind == "real" else 2
        return out

    def abelian_projection(self) -> "TwistedFourierGauge":
        """Closest curvature-free coefficients for a u(1) field: keep the part of each mode along its frequency."""
        if not self.holonomy.spec.is_abelian:
            raise FlatSearchError("the one-step projection only applies to abelian groups", math.nan, self)
        out = self.copy()
        m = np.array(np.meshgrid(self.modes, self.modes, self.modes, indexing="ij"))  # (3, M, M, M)
        for c in range(len(self.channel_kind)):
            k = m + self.channel_shift[c][:, None, None, None]
            kk = np.sum(k * k, axis=0)
            C = out.coef[:, c]
            dot = np.sum(k * C, axis=0)
            proj = np.where(kk > 0, dot / np.where(kk > 0, kk, 1.0), 0.0)
            out.coef[:, c] = np.where(kk > 0, proj * k, C)
        return out


@lru_cache(maxsize=64)
def _fourier_matrix(N: int, B: int, shift: float) -> np.ndarray:
    x = TWO_PI * np.arange(N) / N
    E = np.exp(1j * np.outer(x, np.arange(-B, B + 1) + shift))
    E.flags.writeable = False
    return E


def _axis_factor(v: np.ndarray, axis: int) -> np.ndarray:
    shape = [1, 1, 1]
    shape[axis] = len(v)
    return v.reshape(shape)


def _bracket_adjoint_left(spec: LieAlgebraSpec, G, Y):
    """``X -> <G, [X, Y]>_euclid`` as a vector: for su(2), ``2 Y x G``."""
    return _bracket_adjoint(spec, G, Y, left=True)


def _bracket_adjoint_right(spec: LieAlgebraSpec, G, X):
    """``Y -> <G, [X, Y]>_euclid`` as a vector: for su(2), ``2 G x X``."""
    return _bracket_adjoint(spec, G, X, left=False)


def _bracket_adjoint(spec, G, other, left):
    parts = []
    for f, s in zip(spec.factors, spec.algebra_slices):
        g, o = G[..., s], other[..., s]
        if f == U1:
            parts.append(np.zeros_like(g))
        else:
            parts.append(2.0 * (np.cross(o, g) if left else np.cross(g, o)))
    return np.concatenate(parts, axis=-1)


def find_flat_connection(A_init, holonomy: HolonomyData | None = None, opts: FlatOptions | None = None) -> TwistedFourierGauge:
    """Gradient descent with backtracking on the curvature residual ``R``.

    ``A_init`` is a :class:`TwistedFourierGauge` or a twisted gauge field
    (projected onto bandwidth ``opts.bandwidth``). Each iteration appends
    ``(iteration, residual, step)`` to ``opts.log``.
    """
    opts = opts or FlatOptions()
    if isinstance(A_init, TwistedFourierGauge):
        state = A_init.copy()
    else:
        form = A_init.carrier if isinstance(A_init, TwistedField) else A_init
        hol = A_init.holonomy if isinstance(A_init, TwistedField) else holonomy
        if hol is None:
            raise FlatSearchError("pass the holonomy for a plain gauge field", math.nan, None)
        state = TwistedFourierGauge.project(form, hol, opts.bandwidth)
    N = opts.grid or state.default_grid()
    method = opts.method
    if method == "auto":
        method = "newton" if state.holonomy.spec.is_abelian else "gradient"
    R = state.residual(N)
    opts.log.append((0, R, 0.0))
    if R < opts.tol:
        return state
    if method == "newton":
        state = state.abelian_projection()
        R = state.residual(N)
        opts.log.append((1, R, 1.0))
        if R < opts.tol:
            return state
        raise FlatSearchError(f"abelian projection left R = {R:.3g}", R, state)
    step = opts.initial_step
    for it in range(1, opts.max_iters + 1):
        R, g = state.gradient(N)
        gg = float(np.sum(np.abs(g) ** 2))
        if gg == 0.0:
            break
        while True:
            trial = state.copy(state.coef - step * g)
            Rt = trial.residual(N)
            if Rt <= R - opts.armijo * step * gg or step < 1e-16:
                break
            step *= 0.5
        state, R = trial, Rt
        opts.log.append((it, R, step))
        if R < opts.tol:
            return state
        step *= 2.0
    raise FlatSearchError(f"no flat connection within {opts.max_iters} iterations (R = {R:.3g})", R, state)


def log_csv(log) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "residual", "step"])
    for it, R, step in log:
        w.writerow([it, repr(float(R)), repr(float(step))])
    return buf.getvalue()
