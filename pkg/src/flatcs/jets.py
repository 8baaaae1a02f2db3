"""Second-order jets of fields on the flat torus and periodic quadrature.

A :class:`Jet` carries the value, gradient and Hessian of a (possibly
vector-valued) field at a batch of points::

    val : (P, *V)
    d1  : (n, P, *V)        d1[a]    = d/dx_a
    d2  : (n, n, P, *V)     d2[a, b] = d^2/dx_a dx_b

Derivative axes come first so that any function acting on the trailing
value axes (``np.cross``, quaternion products, ``...``-einsums) applies to
all three parts unchanged. Taking a partial derivative drops one order;
``d1``/``d2`` are ``None`` when that information is not available.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi
CHUNK = 4096


class JetOrderError(ValueError):
    """A derivative was requested beyond the order carried by a jet."""


class Jet:
    __slots__ = ("val", "d1", "d2")

    def __init__(self, val, d1=None, d2=None):
        self.val = np.asarray(val, dtype=float)
        self.d1 = None if d1 is None else np.asarray(d1, dtype=float)
        self.d2 = None if d2 is None or d1 is None else np.asarray(d2, dtype=float)

    # -- construction --------------------------------------------------------

    @classmethod
    def constant(cls, val, n: int, order: int = 2) -> "Jet":
        val = np.asarray(val, dtype=float)
        d1 = np.zeros((n,) + val.shape) if order >= 1 else None
        d2 = np.zeros((n, n) + val.shape) if order >= 2 else None
        return cls(val, d1, d2)

    @classmethod
    def coordinate(cls, points, k: int) -> "Jet":
        points = np.asarray(points, dtype=float)
        P, n = points.shape
        d1 = np.zeros((n, P))
        d1[k] = 1.0
        return cls(points[:, k].copy(), d1, np.zeros((n, n, P)))

    # -- bookkeeping ---------------------------------------------------------

    @property
    def order(self) -> int:
        return 0 if self.d1 is None else (1 if self.d2 is None else 2)

    @property
    def shape(self) -> tuple:
        return self.val.shape

    def truncate(self, order: int) -> "Jet":
        return Jet(self.val, self.d1 if order >= 1 else None, self.d2 if order >= 2 else None)

    def partial(self, a: int) -> "Jet":
        """Jet of the partial derivative along coordinate ``a`` (one order lower)."""
        if self.d1 is None:
            raise JetOrderError("cannot differentiate an order-0 jet")
        return Jet(self.d1[a], None if self.d2 is None else self.d2[a])

    def linear(self, fn: Callable) -> "Jet":
        """Apply a map that is linear in the value (acts on trailing axes)."""
        return Jet(fn(self.val), None if self.d1 is None else fn(self.d1), None if self.d2 is None else fn(self.d2))

    def __getitem__(self, idx) -> "Jet":
        # indexes the trailing value axes only
        if not isinstance(idx, tuple):
            idx = (idx,)
        key = (Ellipsis,) + idx
        return self.linear(lambda a: a[key])

    # -- products ------------------------------------------------------------

    @staticmethod
    def bilinear(a: "Jet", b: "Jet", fn: Callable) -> "Jet":
        """Leibniz rule for ``fn(a, b)`` with ``fn`` bilinear on trailing axes."""
        val = fn(a.val, b.val)
        order = min(a.order, b.order)
        if order == 0:
            return Jet(val)
        d1 = fn(a.d1, b.val[None]) + fn(a.val[None], b.d1)
        if order == 1:
            return Jet(val, d1)
        cross = fn(a.d1[:, None], b.d1[None, :])
        d2 = fn(a.d2, b.val[None, None]) + fn(a.val[None, None], b.d2) + cross + np.swapaxes(cross, 0, 1)
        return Jet(val, d1, d2)

    def apply(self, f0, f1, f2) -> "Jet":
        """Elementwise ``f(self)`` given ``f``, ``f'`` and ``f''`` as callables."""
        u = self.val
        val = f0(u)
        if self.d1 is None:
            return Jet(val)
        g1 = f1(u)
        d1 = g1 * self.d1
        if self.d2 is None:
            return Jet(val, d1)
        g2 = f2(u)
        d2 = g2 * self.d1[:, None] * self.d1[None, :] + g1 * self.d2
        return Jet(val, d1, d2)

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        n = self.d1.shape[0] if self.d1 is not None else 0
        return Jet.constant(np.broadcast_to(np.asarray(other, float), self.val.shape), n, self.order)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.d1, self.d2)
        order = min(self.order, other.order)
        a, b = self.truncate(order), other.truncate(order)
        return Jet(
            a.val + b.val,
            None if order < 1 else a.d1 + b.d1,
            None if order < 2 else a.d2 + b.d2,
        )

    __radd__ = __add__

    def __neg__(self):
        return self.linear(np.negative)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet.bilinear(self, other, np.multiply)
        return self.linear(lambda a: a * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "Jet":
        return self.apply(lambda u: 1.0 / u, lambda u: -1.0 / u**2, lambda u: 2.0 / u**3)

    def __pow__(self, k: int):
        if not float(k).is_integer():
            raise ValueError("only integer powers are supported")
        k = int(k)
        if k == 0:
            return self._lift(1.0)
        if k < 0:
            return self.reciprocal() ** (-k)
        return self.apply(
            lambda u: u**k,
            lambda u: k * u ** (k - 1),
            lambda u: k * (k - 1) * u ** (k - 2) if k >= 2 else np.zeros_like(u),
        )

    # -- analytic primitives -------------------------------------------------

    def sin(self):
        return self.apply(np.sin, np.cos, lambda u: -np.sin(u))

    def cos(self):
        return self.apply(np.cos, lambda u: -np.sin(u), lambda u: -np.cos(u))

    def exp(self):
        return self.apply(np.exp, np.exp, np.exp)

    def sqrt(self):
        return self.apply(np.sqrt, lambda u: 0.5 / np.sqrt(u), lambda u: -0.25 * u**-1.5)

    def __repr__(self):
        return f"Jet(shape={self.val.shape}, order={self.order})"


def stack(jets, axis: int = -1) -> Jet:
    """Stack jets along a new trailing-relative value axis."""
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    ax = axis if axis < 0 else axis
    val = np.stack([j.val for j in jets], axis=ax)
    d1 = np.stack([j.d1 for j in jets], axis=ax) if order >= 1 else None
    d2 = np.stack([j.d2 for j in jets], axis=ax) if order >= 2 else None
    return Jet(val, d1, d2)


def concatenate(jets, axis: int = -1) -> Jet:
    order = min(j.order for j in jets)
    jets = [j.truncate(order) for j in jets]
    val = np.concatenate([j.val for j in jets], axis=axis)
    d1 = np.concatenate([j.d1 for j in jets], axis=axis) if order >= 1 else None
    d2 = np.concatenate([j.d2 for j in jets], axis=axis) if order >= 2 else None
    return Jet(val, d1, d2)


# -- the torus ----------------------------------------------------------------

@dataclass(frozen=True)
class TorusSpec:
    """The flat torus ``R^n / (2 pi Z)^n`` with ``n <= 4``."""

    dim: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3, 4):
            raise ValueError("torus dimension must be 1, 2, 3 or 4")

    @property
    def center(self) -> np.ndarray:
        return np.full(self.dim, math.pi)

    @property
    def volume(self) -> float:
        return TWO_PI**self.dim

    def grid(self, N: int) -> np.ndarray:
        """Uniform periodic grid in lexicographic order, shape ``(N**n, n)``."""
        return grid_points(self.dim, N)

    def random_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.0, TWO_PI, size=(count, self.dim))

    def sample_points(self, N: int = 8, extra: int = 100, seed: int = 0) -> np.ndarray:
        """Grid plus random points, the sampling used for identity residuals."""
        rng = np.random.default_rng(seed)
        return np.concatenate([self.grid(N), self.random_points(extra, rng)])


def grid_points(n: int, N: int) -> np.ndarray:
    if N < 2:
        raise ValueError("grid needs at least 2 points per axis")
    axis = TWO_PI * np.arange(N) / N
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


# -- deterministic evaluation and summation ----------------------------------

def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("FLATCS_THREADS", "1")))
    except ValueError:
        return 1


def map_chunks(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, chunk: int = CHUNK) -> np.ndarray:
    """Evaluate ``fn`` on fixed-size chunks of ``points`` and concatenate.

    Chunk boundaries do not depend on the thread count, so results are
    bit-identical however many workers run.
    """
    pieces = [points[i : i + chunk] for i in range(0, len(points), chunk)]
    workers = thread_count()
    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(fn, pieces))
    else:
        out = [fn(p) for p in pieces]
    return np.concatenate(out, axis=0)


def compensated_sum(values) -> float:
    """Correctly rounded sum (order independent, hence reproducible)."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def quadrature(f, N: int, dim: int | None = None) -> float:
    """Rectangle rule on the uniform ``N^n`` grid of ``[0, 2 pi)^n``.

    ``f`` is either a scalar field (anything with ``jet(points)``) or a
    callable mapping a ``(P, n)`` array to ``P`` values.
    """
    if dim is None:
        dim = getattr(f, "dim", None)
        if dim is None:
            raise ValueError("pass dim= for plain callables")
    if hasattr(f, "values"):
        fn = f.values
    else:
        fn = f
    values = map_chunks(lambda p: np.asarray(fn(p), dtype=float), grid_points(dim, N))
    return compensated_sum(values) * (TWO_PI / N) ** dim
