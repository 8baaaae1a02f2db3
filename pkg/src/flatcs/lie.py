"""Compact Lie algebras and groups built from U(1) and SU(2) factors.

Conventions
-----------
* su(2) is the space of pure quaternions ``x i + y j + z k`` with the
  commutator bracket ``[X, Y] = XY - YX`` (so ``[i, j] = 2k``).
* u(1) is ``i R`` inside the complex numbers; its bracket vanishes.
* Group elements are unit quaternions ``(w, x, y, z)`` (scalar first) and
  unit complex numbers ``(cos t, sin t)``.

Every element is a plain float array whose *trailing* axis holds the
concatenated per-factor coordinates. All functions broadcast over leading
axes, which is what lets the jet layer reuse them unchanged.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

U1 = "u1"
SU2 = "su2"

ALGEBRA_DIM = {U1: 1, SU2: 3}
GROUP_DIM = {U1: 2, SU2: 4}

#: Inner-product scale making the Maurer-Cartan 3-form of SU(2) integral.
NORMALIZED_SU2_SCALE = 1.0 / (4.0 * math.pi**2)


class AlgebraMismatch(ValueError):
    """Raised when operands do not belong to the same algebra or group."""


class CutLocusError(ValueError):
    """Raised by :func:`LieAlgebraSpec.log` at the antipode of the identity."""


# -- quaternion / complex kernels (trailing axis) ---------------------------

def qmul(a, b):
    """Hamilton product on the trailing axis, broadcasting over the rest."""
    a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def cmul(a, b):
    a0, a1 = a[..., 0], a[..., 1]
    b0, b1 = b[..., 0], b[..., 1]
    return np.stack([a0 * b0 - a1 * b1, a0 * b1 + a1 * b0], axis=-1)


def _cross2(a, b):
    # su(2) bracket: [X, Y] = 2 X x Y for pure quaternions
    return 2.0 * np.cross(a, b)


@dataclass(frozen=True)
class LieAlgebraSpec:
    """A product of u(1) and su(2) factors with one inner-product scale each.

    The inner product is ``<X, Y> = sum_f scales[f] * (X_f . Y_f)``, which is
    Ad-invariant for any positive scales.
    """

    factors: tuple[str, ...]
    scales: tuple[float, ...] = field(default=())

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("at least one factor is required")
        for f in factors:
            if f not in ALGEBRA_DIM:
                raise ValueError(f"unknown factor {f!r}; expected 'u1' or 'su2'")
        scales = tuple(float(s) for s in self.scales) if self.scales else (1.0,) * len(factors)
        if len(scales) != len(factors):
            raise ValueError("need exactly one scale per factor")
        if any(not s > 0 for s in scales):
            raise ValueError("inner-product scales must be positive")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "scales", scales)

    # -- constructors ------------------------------------------------------

    @classmethod
    def su2(cls, scale: float = 1.0) -> "LieAlgebraSpec":
        return cls((SU2,), (scale,))

    @classmethod
    def u1(cls, scale: float = 1.0) -> "LieAlgebraSpec":
        return cls((U1,), (scale,))

    @classmethod
    def normalized(cls, factors: Sequence[str]) -> "LieAlgebraSpec":
        """Scales set to ``1/(4 pi^2)`` on su(2) factors and 1 on u(1)."""
        return cls(tuple(factors), tuple(NORMALIZED_SU2_SCALE if f == SU2 else 1.0 for f in factors))

    def with_scales(self, scales: Sequence[float]) -> "LieAlgebraSpec":
        return LieAlgebraSpec(self.factors, tuple(scales))

    # -- layout --------------------------------------------------------------

    @property
    def dim(self) -> int:
        return sum(ALGEBRA_DIM[f] for f in self.factors)

    @property
    def group_dim(self) -> int:
        return sum(GROUP_DIM[f] for f in self.factors)

    @property
    def is_abelian(self) -> bool:
        return all(f == U1 for f in self.factors)

    def _slices(self, table):
        out, start = [], 0
        for f in self.factors:
            out.append(slice(start, start + table[f]))
            start += table[f]
        return out

    @property
    def algebra_slices(self) -> list[slice]:
        return self._slices(ALGEBRA_DIM)

    @property
    def group_slices(self) -> list[slice]:
        return self._slices(GROUP_DIM)

    def _check(self, a, size, what):
        if np.shape(a)[-1:] != (size,):
            raise AlgebraMismatch(
                f"{what} has trailing dimension {np.shape(a)[-1:]} but the algebra {self.factors} needs {size}"
            )

    def _per_factor(self, fn, arrays, tables):
        if len(self.factors) == 1:
            return fn(self.factors[0], *arrays)
        parts = []
        for k, f in enumerate(self.factors):
            args = [a[..., s[k]] for a, s in zip(arrays, tables)]
            parts.append(fn(f, *args))
        return np.concatenate(parts, axis=-1)

    # -- algebra -------------------------------------------------------------

    def basis(self) -> np.ndarray:
        return np.eye(self.dim)

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim)

    def bracket(self, X, Y):
        X, Y = np.asarray(X, float), np.asarray(Y, float)
        self._check(X, self.dim, "X")
        self._check(Y, self.dim, "Y")
        sl = self.algebra_slices

        def one(f, x, y):
            if f == U1:
                return np.zeros(np.broadcast_shapes(x.shape, y.shape))
            return _cross2(*np.broadcast_arrays(x, y))

        return self._per_factor(one, (X, Y), (sl, sl))

    def inner(self, X, Y):
        X, Y = np.asarray(X, float), np.asarray(Y, float)
        self._check(X, self.dim, "X")
        self._check(Y, self.dim, "Y")
        w = np.concatenate([np.full(ALGEBRA_DIM[f], s) for f, s in zip(self.factors, self.scales)])
        return np.sum(X * Y * w, axis=-1)

    def metric(self) -> np.ndarray:
        """Gram matrix of the inner product in the coordinate basis."""
        return np.diag(np.concatenate([np.full(ALGEBRA_DIM[f], s) for f, s in zip(self.factors, self.scales)]))

    # -- group ---------------------------------------------------------------

    def identity(self) -> np.ndarray:
        parts = []
        for f in self.factors:
            e = np.zeros(GROUP_DIM[f])
            e[0] = 1.0
            parts.append(e)
        return np.concatenate(parts)

    def raw_mul(self, g, h):
        """Group product without renormalisation (bilinear; used by jets)."""
        sl = self.group_slices
        return self._per_factor(lambda f, a, b: cmul(a, b) if f == U1 else qmul(a, b), (g, h), (sl, sl))

    def mul(self, g, h):
        g, h = np.asarray(g, float), np.asarray(h, float)
        self._check(g, self.group_dim, "g")
        self._check(h, self.group_dim, "h")
        return self.renormalize(self.raw_mul(g, h))

    def renormalize(self, g):
        sl = self.group_slices
        return self._per_factor(lambda f, a: a / np.linalg.norm(a, axis=-1, keepdims=True), (g,), (sl,))

    def conj(self, g):
        """Hypercomplex conjugate; equals the inverse on unit elements."""
        return _conj_blocks(np.asarray(g, float), self.group_slices)

    def inv(self, g):
        g = np.asarray(g, float)
        self._check(g, self.group_dim, "g")
        return self.conj(g)

    def embed(self, X):
        """Algebra coordinates -> purely imaginary hypercomplex coordinates."""
        X = np.asarray(X, float)
        parts = []
        for f, s in zip(self.factors, self.algebra_slices):
            x = X[..., s]
            parts.append(np.concatenate([np.zeros(x.shape[:-1] + (1,)), x], axis=-1))
        return np.concatenate(parts, axis=-1)

    def project(self, q):
        """Imaginary part of hypercomplex coordinates, as algebra coordinates."""
        q = np.asarray(q)
        return np.concatenate([q[..., s][..., 1:] for s in self.group_slices], axis=-1)

    def adjoint(self, g, X):
        """``Ad_g X = g X g^{-1}``."""
        g, X = np.asarray(g, float), np.asarray(X, float)
        self._check(g, self.group_dim, "g")
        self._check(X, self.dim, "X")
        return self.project(self.raw_mul(self.raw_mul(g, self.embed(X)), self.conj(g)))

    def exp(self, X):
        X = np.asarray(X, float)
        self._check(X, self.dim, "X")

        def one(f, x):
            if f == U1:
                return np.concatenate([np.cos(x), np.sin(x)], axis=-1)
            t = np.linalg.norm(x, axis=-1, keepdims=True)
            return np.concatenate([np.cos(t), np.sinc(t / np.pi) * x], axis=-1)

        return self._per_factor(one, (X,), (self.algebra_slices,))

    def log(self, g, cut_tol: float = 1e-12):
        """Principal logarithm; ``|log g| <= pi`` on each su(2) factor."""
        g = np.asarray(g, float)
        self._check(g, self.group_dim, "g")

        def one(f, q):
            if f == U1:
                return np.arctan2(q[..., 1:2], q[..., 0:1])
            v = q[..., 1:]
            s = np.linalg.norm(v, axis=-1, keepdims=True)
            if np.any((q[..., 0:1] < 0) & (s < cut_tol)):
                raise CutLocusError("cut-locus: element is antipodal to the identity")
            angle = np.arctan2(s, q[..., 0:1])
            safe = np.where(s > 0, s, 1.0)
            return np.where(s > 0, angle / safe, 1.0) * v

        return self._per_factor(one, (g,), (self.group_slices,))

    def random_algebra(self, rng: np.random.Generator, size=(), scale: float = 1.0) -> np.ndarray:
        return scale * rng.standard_normal(_shape(size) + (self.dim,))

    def random_group(self, rng: np.random.Generator, size=()) -> np.ndarray:
        return self.renormalize(rng.standard_normal(_shape(size) + (self.group_dim,)))

    # -- serialisation ---------------------------------------------------------

    def split(self, a, kind: str = "algebra") -> list[list[float]]:
        """Per-factor coordinate lists of one element."""
        slices = self.algebra_slices if kind == "algebra" else self.group_slices
        a = np.asarray(a, float)
        return [a[s].tolist() for s in slices]

    def join(self, parts: Sequence[Sequence[float]], kind: str = "algebra") -> np.ndarray:
        table = ALGEBRA_DIM if kind == "algebra" else GROUP_DIM
        if len(parts) != len(self.factors):
            raise AlgebraMismatch(f"expected {len(self.factors)} factor blocks, got {len(parts)}")
        out = []
        for f, p in zip(self.factors, parts):
            if len(p) != table[f]:
                raise AlgebraMismatch(f"factor {f} needs {table[f]} coordinates, got {len(p)}")
            out.extend(float(v) for v in p)
        return np.array(out)

    def to_json(self, a, kind: str = "algebra") -> str:
        return json.dumps(self.split(a, kind))

    def from_json(self, text: str, kind: str = "algebra") -> np.ndarray:
        return self.join(json.loads(text), kind)


def _conj_blocks(g, slices):
    out = g.copy()
    for s in slices:
        out[..., s.start + 1 : s.stop] *= -1.0
    return out


def _shape(size) -> tuple:
    return (size,) if isinstance(size, (int, np.integer)) else tuple(size)
