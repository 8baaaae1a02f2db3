"""Vector-valued differential forms on the flat torus.

A :class:`VForm` is a lazy, immutable k-form on ``T^n`` with values in R,
the Lie algebra g, or g (x) g. Evaluating it at a batch of points gives a
:class:`~flatcs.jets.Jet` whose value has shape ``(P, C, *V)``: one slot
per strictly increasing multi-index (``itertools.combinations`` order) and
the value-space axes after it.

Wedge products use the determinant convention, e.g. for 1-forms
``P(a ^ b)(X, Y) = P(a(X), b(Y)) - P(a(Y), b(X))`` for a bilinear pairing P,
so that ``dx ^ dy`` evaluates to 1 on ``(e_x, e_y)``.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .expr import ScalarField, as_field
from .jets import Jet, quadrature, stack
from .lie import LieAlgebraSpec

REAL, ALGEBRA, TENSOR = "R", "g", "gg"


class FormError(ValueError):
    pass


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.combinations(range(n), k))


@lru_cache(maxsize=None)
def _index_of(n: int, k: int) -> dict:
    return {I: c for c, I in enumerate(multi_indices(n, k))}


def _sort_sign(seq) -> tuple[int, tuple]:
    """Sign of the permutation sorting ``seq`` (0 if entries repeat)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, ()
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int):
    """Index gathers and signed scatter matrix for the wedge of a p- and q-form."""
    ii, jj, rows = [], [], []
    out_index = _index_of(n, p + q)
    for a, I in enumerate(multi_indices(n, p)):
        for b, J in enumerate(multi_indices(n, q)):
            sign, K = _sort_sign(I + J)
            if sign == 0:
                continue
            ii.append(a)
            jj.append(b)
            rows.append((out_index[K], sign))
    M = np.zeros((len(rows), len(multi_indices(n, p + q))))
    for m, (c, sign) in enumerate(rows):
        M[m, c] = sign
    return np.array(ii, dtype=int), np.array(jj, dtype=int), M


@lru_cache(maxsize=None)
def _derivative_tables(n: int, k: int):
    """For each coordinate c, the signed map from k-form slots to (k+1)-form slots."""
    out_index = _index_of(n, k + 1)
    tables = []
    for c in range(n):
        M = np.zeros((len(multi_indices(n, k)), len(multi_indices(n, k + 1))))
        for a, I in enumerate(multi_indices(n, k)):
            sign, K = _sort_sign((c,) + I)
            if sign:
                M[a, out_index[K]] = sign
        tables.append(M)
    return tables


def _contract_slots(jet: Jet, M: np.ndarray, vrank: int) -> Jet:
    """Apply a matrix over the multi-index axis (the one before the value axes)."""
    ax = -(1 + vrank)

    def fn(a):
        return np.moveaxis(np.tensordot(np.moveaxis(a, ax, -1), M, axes=([-1], [0])), -1, ax)

    return jet.linear(fn)


class VForm:
    """Lazy V-valued differential form of a fixed degree on ``T^n``."""

    def __init__(self, n: int, degree: int, vshape: tuple, evaluator: Callable[[np.ndarray, int], Jet],
                 spec: LieAlgebraSpec | None = None):
        self.n = int(n)
        self.degree = int(degree)
        self.vshape = tuple(vshape)
        self.spec = spec
        self._eval = evaluator
        # one-slot memo: subtrees shared inside an expression are evaluated once per point batch
        self._memo = None
        if self.vspace != REAL and spec is None:
            raise FormError("Lie-algebra valued forms need a LieAlgebraSpec")

    # -- metadata --------------------------------------------------------------

    @property
    def vspace(self) -> str:
        return {0: REAL, 1: ALGEBRA, 2: TENSOR}[len(self.vshape)]

    @property
    def vrank(self) -> int:
        return len(self.vshape)

    @property
    def slots(self) -> tuple[tuple[int, ...], ...]:
        return multi_indices(self.n, self.degree)

    @property
    def is_zero_object(self) -> bool:
        return self.degree > self.n

    def at(self, points, order: int = 2) -> Jet:
        """Jet of all components at a batch of points, carrying derivatives up to ``order``.

        The batch must not be mutated afterwards (results are memoised on its identity).
        """
        memo = self._memo
        if memo is not None and memo[0] is points and memo[1] >= order:
            return memo[2] if memo[1] == order else memo[2].truncate(order)
        arr = np.asarray(points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != self.n:
            raise FormError(f"expected points of shape (P, {self.n}), got {arr.shape}")
        out = self._eval(arr, order)
        if out.order > order:
            out = out.truncate(order)
        self._memo = (points, order, out)
        return out

    def __repr__(self):
        return f"VForm(n={self.n}, degree={self.degree}, vspace={self.vspace})"

    # -- constructors ------------------------------------------------------------

    @classmethod
    def zero(cls, n: int, degree: int, vshape: tuple = (), spec=None) -> "VForm":
        C = len(multi_indices(n, degree))

        def ev(points, order):
            return Jet.constant(np.zeros((len(points), C) + tuple(vshape)), n, order)

        return cls(n, degree, vshape, ev, spec)

    @classmethod
    def from_components(cls, n: int, degree: int, components: Mapping, spec: LieAlgebraSpec | None = None) -> "VForm":
        """Build from ``{multi_index: coefficient}``.

        Coefficients are scalar fields (real form) or sequences of scalar
        fields of length ``spec.dim`` (Lie-algebra valued form). Multi-indices
        may be unsorted; the sign is absorbed.
        """
        index = _index_of(n, degree)
        vshape = () if spec is None else (spec.dim,)
        entries = []
        for I, coef in components.items():
            I = tuple(int(i) for i in (I if isinstance(I, tuple) else (I,)))
            if len(I) != degree or any(i >= n for i in I):
                raise FormError(f"multi-index {I} does not fit a {degree}-form on T^{n}")
            sign, K = _sort_sign(I)
            if sign == 0:
                continue
            if spec is None:
                fields = [as_field(coef)]
            else:
                fields = [as_field(c) for c in coef]
                if len(fields) != spec.dim:
                    raise FormError(f"algebra coefficient needs {spec.dim} entries")
            entries.append((index[K], sign, fields))
        C = len(index)

        def ev(points, order):
            P = len(points)
            out = Jet.constant(np.zeros((P, C) + vshape), n, order)
            for c, sign, fields in entries:
                for v, f in enumerate(fields):
                    j = f.jet(points, order)
                    key = (slice(None), c) + ((v,) if vshape else ())
                    out.val[key] += sign * j.val
                    if order >= 1:
                        out.d1[(slice(None),) + key] += sign * j.d1
                    if order >= 2:
                        out.d2[(slice(None), slice(None)) + key] += sign * j.d2
            return out

        return cls(n, degree, vshape, ev, spec)

    @classmethod
    def scalar(cls, f: ScalarField, n: int) -> "VForm":
        return cls.from_components(n, 0, {(): f})

    @classmethod
    def algebra_field(cls, coefs, n: int, spec: LieAlgebraSpec) -> "VForm":
        """A g-valued 0-form from one scalar field per algebra coordinate."""
        return cls.from_components(n, 0, {(): coefs}, spec)

    @classmethod
    def constant(cls, n: int, degree: int, values, spec: LieAlgebraSpec | None = None) -> "VForm":
        """Constant coefficients: ``values`` has shape ``(C, *V)``."""
        values = np.asarray(values, float)
        vshape = values.shape[1:]

        def ev(points, order):
            return Jet.constant(np.broadcast_to(values, (len(points),) + values.shape).copy(), n, order)

        return cls(n, degree, vshape, ev, spec)

    # -- linear structure ----------------------------------------------------------

    def _like(self, other: "VForm"):
        if (self.n, self.degree, self.vshape) != (other.n, other.degree, other.vshape):
            raise FormError(f"cannot combine {self!r} with {other!r}")

    def __add__(self, other: "VForm") -> "VForm":
        self._like(other)
        return VForm(self.n, self.degree, self.vshape, lambda p, o: self.at(p, o) + other.at(p, o), self.spec or other.spec)

    def __sub__(self, other: "VForm") -> "VForm":
        self._like(other)
        return VForm(self.n, self.degree, self.vshape, lambda p, o: self.at(p, o) - other.at(p, o), self.spec or other.spec)

    def __neg__(self) -> "VForm":
        return self.map_values(np.negative)

    def __mul__(self, c: float) -> "VForm":
        c = float(c)
        return self.map_values(lambda a: a * c)

    __rmul__ = __mul__

    def map_values(self, fn: Callable, vshape=None, spec="same") -> "VForm":
        """Apply a pointwise map linear in the value (acting on trailing value axes)."""
        vshape = self.vshape if vshape is None else tuple(vshape)
        spec = self.spec if spec == "same" else spec
        return VForm(self.n, self.degree, vshape, lambda p, o: self.at(p, o).linear(fn), spec)

    def component(self, I) -> "VForm":
        """The coefficient of ``dx^I`` as a 0-form (sign-adjusted for unsorted I)."""
        sign, K = _sort_sign(tuple(I))
        c = _index_of(self.n, self.degree)[K]
        ax = -(1 + self.vrank)

        def ev(p, o):
            return self.at(p, o).linear(lambda a: sign * np.take(a, [c], axis=ax))

        return VForm(self.n, 0, self.vshape, ev, self.spec)


# -- pairings -------------------------------------------------------------------

def _pairing(name: str, alpha: VForm, beta: VForm):
    spec = alpha.spec or beta.spec
    va, vb = alpha.vspace, beta.vspace
    if name == "inner":
        if not (va == vb == ALGEBRA):
            raise FormError("the inner-product pairing needs two g-valued forms")
        return spec.inner, ()
    if name == "bracket":
        if not (va == vb == ALGEBRA):
            raise FormError("the bracket pairing needs two g-valued forms")
        return spec.bracket, (spec.dim,)
    if name == "tensor":
        if not (va == vb == ALGEBRA):
            raise FormError("the tensor pairing needs two g-valued forms")
        return (lambda a, b: a[..., :, None] * b[..., None, :]), (spec.dim, spec.dim)
    if name == "scalar":
        if va == REAL and vb == REAL:
            return np.multiply, ()
        if va == REAL:
            return (lambda a, b: a[(...,) + (None,) * beta.vrank] * b), beta.vshape
        if vb == REAL:
            return (lambda a, b: a * b[(...,) + (None,) * alpha.vrank]), alpha.vshape
        raise FormError("the scalar pairing needs at least one real-valued form")
    raise FormError(f"unknown pairing {name!r}")


def wedge_with_pairing(pairing: str, alpha: VForm, beta: VForm) -> VForm:
    """``P(alpha ^ beta)`` for ``P`` in {'inner', 'bracket', 'tensor', 'scalar'}."""
    if alpha.n != beta.n:
        raise FormError("forms live on tori of different dimension")
    fn, vshape = _pairing(pairing, alpha, beta)
    n, p, q = alpha.n, alpha.degree, beta.degree
    spec = alpha.spec or beta.spec
    if p + q > n:
        return VForm.zero(n, p + q, vshape, spec if vshape else None)
    ii, jj, M = _wedge_table(n, p, q)
    ra, rb = alpha.vrank, beta.vrank

    def ev(points, order):
        a = alpha.at(points, order).linear(lambda x: np.take(x, ii, axis=-(1 + ra)))
        b = beta.at(points, order).linear(lambda x: np.take(x, jj, axis=-(1 + rb)))
        prod = Jet.bilinear(a, b, fn)
        return _contract_slots(prod, M, len(vshape))

    return VForm(n, p + q, vshape, ev, spec if vshape else None)


def inner_wedge(alpha: VForm, beta: VForm) -> VForm:
    return wedge_with_pairing("inner", alpha, beta)


def bracket_wedge(alpha: VForm, beta: VForm) -> VForm:
    return wedge_with_pairing("bracket", alpha, beta)


def contract(form: VForm, pairing: str) -> VForm:
    """Contract a g(x)g-valued form with the inner product or the bracket."""
    if form.vspace != TENSOR:
        raise FormError("contract expects a g(x)g-valued form")
    spec = form.spec
    if pairing == "inner":
        G = spec.metric()
        return form.map_values(lambda a: np.einsum("...ab,ab->...", a, G), vshape=(), spec=None)
    if pairing == "bracket":
        E = spec.basis()
        table = spec.bracket(E[:, None, :], E[None, :, :])  # (dim, dim, dim)
        return form.map_values(lambda a: np.einsum("...ab,abc->...c", a, table), vshape=(spec.dim,))
    raise FormError(f"unknown pairing {pairing!r}")


# -- calculus -------------------------------------------------------------------

def exterior_derivative(alpha: VForm) -> VForm:
    n, k = alpha.n, alpha.degree
    if k >= n:
        return VForm.zero(n, k + 1, alpha.vshape, alpha.spec)
    tables = _derivative_tables(n, k)
    vrank = alpha.vrank

    def ev(points, order):
        a = alpha.at(points, order + 1)
        out = None
        for c, M in enumerate(tables):
            term = _contract_slots(a.partial(c), M, vrank)
            out = term if out is None else out + term
        return out

    return VForm(n, k + 1, alpha.vshape, ev, alpha.spec)


d = exterior_derivative


def twisted_derivative(A: VForm, alpha: VForm) -> VForm:
    """``d alpha + [A ^ alpha]`` for a g-valued form ``alpha``."""
    if alpha.vspace != ALGEBRA:
        raise FormError("the twisted derivative acts on g-valued forms")
    return exterior_derivative(alpha) + bracket_wedge(A, alpha)


def evaluate(alpha: VForm, x, vectors) -> np.ndarray:
    """Value of ``alpha`` at the point ``x`` on the given tangent vectors."""
    x = np.asarray(x, float).reshape(1, -1)
    V = np.asarray(vectors, float).reshape(-1, alpha.n) if alpha.degree else np.zeros((0, alpha.n))
    if x.shape[1] != alpha.n:
        raise FormError(f"point has dimension {x.shape[1]}, form lives on T^{alpha.n}")
    if len(V) != alpha.degree:
        raise FormError(f"a {alpha.degree}-form takes {alpha.degree} vectors, got {len(V)}")
    if alpha.is_zero_object:
        return np.zeros(alpha.vshape)
    val = alpha.at(x, 0).val[0]  # (C, *V)
    weights = np.array([np.linalg.det(V[:, list(I)]) if I else 1.0 for I in alpha.slots])
    return np.tensordot(weights, val, axes=([0], [0]))


def integrate(omega: VForm, N: int) -> float:
    """Integral of a real top-degree form over ``T^n`` (``dx_1 ^ ... ^ dx_n`` positive)."""
    if omega.degree != omega.n or omega.vspace != REAL:
        raise FormError("integrate expects a real-valued form of top degree")
    return quadrature(lambda p: omega.at(p, 0).val[:, 0], N, dim=omega.n)


def max_abs(form: VForm, points) -> float:
    """Largest absolute component over the sample points (all frames)."""
    if form.is_zero_object:
        return 0.0
    v = form.at(points, 0).val
    return float(np.max(np.abs(v))) if v.size else 0.0


def stack_components(n: int, degree: int, parts: list[Jet], vshape: tuple, spec=None) -> Jet:
    """Assemble per-slot jets into a form jet (slot axis before value axes)."""
    return stack(parts, axis=-(1 + len(vshape)))
