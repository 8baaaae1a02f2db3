"""Scalar fields on the torus as immutable expression trees.

Every node evaluates to a :class:`~flatcs.jets.Jet` at a batch of points
with exact first and second derivatives, and prints back to the scenario
grammar with :meth:`ScalarField.to_text`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .jets import Jet

VAR_NAMES = ("x", "y", "z", "w")

#: Order of the smoothstep used by ``bump``: the profile is C^k with k this value.
BUMP_SMOOTHNESS = 2


class ScalarField:
    """Base class; subclasses implement ``jet``."""

    def jet(self, points, order: int = 2) -> Jet:  # pragma: no cover - abstract
        raise NotImplementedError

    def values(self, points) -> np.ndarray:
        return self.jet(np.asarray(points, float), order=0).val

    def to_text(self) -> str:  # pragma: no cover - abstract
        raise NotImplementedError

    # precedence used by the printer: 0 sum, 1 product, 2 unary, 3 power, 4 atom
    prec = 4

    def __str__(self):
        return self.to_text()

    # arithmetic sugar for building fields in Python
    def __add__(self, other):
        return BinOp("+", self, as_field(other))

    def __radd__(self, other):
        return BinOp("+", as_field(other), self)

    def __sub__(self, other):
        return BinOp("-", self, as_field(other))

    def __rsub__(self, other):
        return BinOp("-", as_field(other), self)

    def __mul__(self, other):
        return BinOp("*", self, as_field(other))

    def __rmul__(self, other):
        return BinOp("*", as_field(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, as_field(other))

    def __rtruediv__(self, other):
        return BinOp("/", as_field(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k: int):
        return Pow(self, int(k))


def as_field(v) -> ScalarField:
    if isinstance(v, ScalarField):
        return v
    return Num(float(v))


def _n(points) -> int:
    return np.asarray(points).shape[1]


def _fmt(v: float) -> str:
    return repr(float(v))


@dataclass(frozen=True, eq=True)
class Num(ScalarField):
    value: float

    def jet(self, points, order=2):
        P = np.asarray(points).shape[0]
        return Jet.constant(np.full(P, self.value), _n(points), order)

    def to_text(self):
        # copysign keeps -0.0 parenthesized like any other negative literal
        return _fmt(self.value) if math.copysign(1.0, self.value) > 0 else f"({_fmt(self.value)})"


@dataclass(frozen=True, eq=True)
class Pi(ScalarField):
    def jet(self, points, order=2):
        return Num(math.pi).jet(points, order)

    def to_text(self):
        return "pi"


@dataclass(frozen=True, eq=True)
class Var(ScalarField):
    index: int

    def jet(self, points, order=2):
        points = np.asarray(points, float)
        if self.index >= points.shape[1]:
            raise ValueError(f"variable {VAR_NAMES[self.index]} needs a torus of dimension > {self.index}")
        return Jet.coordinate(points, self.index).truncate(order)

    def to_text(self):
        return VAR_NAMES[self.index]


@dataclass(frozen=True, eq=True)
class Radial(ScalarField):
    """Distance to the centre ``(pi, ..., pi)`` of the fundamental domain.

    Its derivatives are undefined at the centre (NaN there); use it inside
    ``bump`` where the profile is locally constant.
    """

    def jet(self, points, order=2):
        points = np.asarray(points, float)
        P, n = points.shape
        v = points - math.pi
        s = np.sum(v * v, axis=-1)
        r = np.sqrt(s)
        if order == 0:
            return Jet(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(r > 0, 1.0 / r, np.nan)
            d1 = (v * inv[:, None]).T
            if order == 1:
                return Jet(r, d1)
            eye = np.eye(n)[:, :, None]
            d2 = (eye - d1[:, None] * d1[None, :]) * inv[None, None]
        return Jet(r, d1, d2)

    def to_text(self):
        return "r"


@dataclass(frozen=True, eq=True)
class Neg(ScalarField):
    arg: ScalarField

    @property
    def _literal(self) -> bool:
        return isinstance(self.arg, Num) and math.copysign(1.0, self.arg.value) > 0

    @property
    def prec(self):
        # a negated positive literal prints exactly like the negative literal
        return 4 if self._literal else 2

    def jet(self, points, order=2):
        return -self.arg.jet(points, order)

    def to_text(self):
        if self._literal:
            return Num(-self.arg.value).to_text()
        return "-" + _wrap(self.arg, 3)


@dataclass(frozen=True, eq=True)
class BinOp(ScalarField):
    op: str
    left: ScalarField
    right: ScalarField

    @property
    def prec(self):
        return 0 if self.op in "+-" else 1

    def jet(self, points, order=2):
        a = self.left.jet(points, order)
        b = self.right.jet(points, order)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            return a / b
        raise ValueError(f"unknown operator {self.op}")

    def to_text(self):
        p = self.prec
        left = _wrap(self.left, p)
        # parsing is left-associative, so a right operand of equal precedence keeps its parentheses
        right = _wrap(self.right, p + 1)
        return f"{left} {self.op} {right}"


@dataclass(frozen=True, eq=True)
class Pow(ScalarField):
    base: ScalarField
    exponent: int
    prec = 3

    def jet(self, points, order=2):
        return self.base.jet(points, order) ** self.exponent

    def to_text(self):
        e = str(self.exponent) if self.exponent >= 0 else f"({self.exponent})"
        return f"{_wrap(self.base, 4)}^{e}"


_FUNCS = {"sin": Jet.sin, "cos": Jet.cos, "exp": Jet.exp}


@dataclass(frozen=True, eq=True)
class Call(ScalarField):
    fn: str
    arg: ScalarField

    def __post_init__(self):
        if self.fn not in _FUNCS:
            raise ValueError(f"unknown function {self.fn!r}")

    def jet(self, points, order=2):
        return _FUNCS[self.fn](self.arg.jet(points, order))

    def to_text(self):
        return f"{self.fn}({self.arg.to_text()})"


@lru_cache(maxsize=None)
def smoothstep(k: int):
    """Polynomial ``S`` on [0, 1] with ``S(0)=0, S(1)=1`` and k vanishing derivatives at both ends."""
    P = np.polynomial.Polynomial
    base = P([0, 1]) ** k * P([1, -1]) ** k
    integral = base.integ()
    return integral / integral(1.0)


def bump_profile(t, r0: float, r1: float, k: int = BUMP_SMOOTHNESS):
    """Value and first two derivatives of the radial cutoff at ``t``.

    Equal to 1 on ``[0, r0]`` and 0 on ``[r1, inf)``, C^k in between.
    """
    S = smoothstep(k)
    h = r1 - r0
    u = np.clip((np.asarray(t, float) - r0) / h, 0.0, 1.0)
    inside = (u > 0.0) & (u < 1.0)
    f0 = 1.0 - S(u)
    f1 = np.where(inside, -S.deriv(1)(u) / h, 0.0)
    f2 = np.where(inside, -S.deriv(2)(u) / h**2, 0.0)
    return f0, f1, f2


@dataclass(frozen=True, eq=True)
class Bump(ScalarField):
    arg: ScalarField
    r0: float
    r1: float

    def __post_init__(self):
        if not 0 < self.r0 < self.r1:
            raise ValueError("bump needs 0 < r0 < r1")

    def jet(self, points, order=2):
        a = self.arg.jet(points, order)
        f0, f1, f2 = bump_profile(a.val, self.r0, self.r1)
        if a.order == 0:
            return Jet(f0)
        # the profile is flat on [0, r0]: derivatives vanish there even when
        # the argument's own derivatives are singular (r at the centre)
        flat = (f1 == 0.0) & (f2 == 0.0)
        with np.errstate(invalid="ignore"):
            d1 = np.where(flat, 0.0, f1 * a.d1)
            if a.order == 1:
                return Jet(f0, d1)
            d2 = np.where(flat, 0.0, f2 * a.d1[:, None] * a.d1[None, :] + f1 * a.d2)
        return Jet(f0, d1, d2)

    def to_text(self):
        return f"bump({self.arg.to_text()}, {_fmt(self.r0)}, {_fmt(self.r1)})"


@dataclass(frozen=True, eq=False)
class TrigSeries(ScalarField):
    """``sum_t a_t cos(k_t . x) + b_t sin(k_t . x)`` with real frequency vectors.

    Non-integer frequencies give the twisted (quasi-periodic) fields used on
    flat bundles with holonomy.
    """

    freqs: np.ndarray
    cos_coef: np.ndarray
    sin_coef: np.ndarray
    dim: int = field(default=0)

    def __post_init__(self):
        freqs = np.atleast_2d(np.asarray(self.freqs, float))
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "cos_coef", np.asarray(self.cos_coef, float).reshape(len(freqs)))
        object.__setattr__(self, "sin_coef", np.asarray(self.sin_coef, float).reshape(len(freqs)))
        object.__setattr__(self, "dim", freqs.shape[1])

    @classmethod
    def random(cls, dim: int, bandwidth: int, rng: np.random.Generator, amplitude: float = 1.0,
               terms: int | None = None, shift=None) -> "TrigSeries":
        modes = np.array(np.meshgrid(*([np.arange(-bandwidth, bandwidth + 1)] * dim), indexing="ij")).reshape(dim, -1).T
        if terms is not None and terms < len(modes):
            modes = modes[np.sort(rng.choice(len(modes), size=terms, replace=False))]
        freqs = modes.astype(float) + (0.0 if shift is None else np.asarray(shift, float))
        decay = 1.0 / (1.0 + np.sum(freqs**2, axis=1))
        a = amplitude * rng.standard_normal(len(freqs)) * decay
        b = amplitude * rng.standard_normal(len(freqs)) * decay
        return cls(freqs, a, b)

    def jet(self, points, order=2):
        points = np.asarray(points, float)
        phase = points @ self.freqs.T  # (P, T)
        c, s = np.cos(phase), np.sin(phase)
        val = c @ self.cos_coef + s @ self.sin_coef
        if order == 0:
            return Jet(val)
        # derivative of the series: -a k sin + b k cos
        g = -s * self.cos_coef + c * self.sin_coef  # (P, T)
        d1 = (g @ self.freqs).T
        if order == 1:
            return Jet(val, d1)
        h = -(c * self.cos_coef + s * self.sin_coef)  # (P, T)
        d2 = np.einsum("pt,ta,tb->abp", h, self.freqs, self.freqs)
        return Jet(val, d1, d2)

    def __eq__(self, other):
        return (
            isinstance(other, TrigSeries)
            and np.array_equal(self.freqs, other.freqs)
            and np.array_equal(self.cos_coef, other.cos_coef)
            and np.array_equal(self.sin_coef, other.sin_coef)
        )

    __hash__ = None

    prec = 0

    def to_text(self):
        if len(self.freqs) == 0:
            return "0.0"
        terms = []
        for k, a, b in zip(self.freqs, self.cos_coef, self.sin_coef):
            arg = " + ".join(f"{_fmt(kk)}*{VAR_NAMES[i]}" for i, kk in enumerate(k) if kk != 0.0) or "0.0"
            terms.append(f"{Num(a).to_text()}*cos({arg})")
            terms.append(f"{Num(b).to_text()}*sin({arg})")
        return " + ".join(terms)


def _wrap(node: ScalarField, min_prec: int) -> str:
    text = node.to_text()
    return f"({text})" if node.prec < min_prec else text


# convenient handles for Python-side construction
X, Y, Z, W = (Var(i) for i in range(4))
R = Radial()


def sin(f) -> ScalarField:
    return Call("sin", as_field(f))


def cos(f) -> ScalarField:
    return Call("cos", as_field(f))


def exp(f) -> ScalarField:
    return Call("exp", as_field(f))


def bump(f, r0: float, r1: float) -> ScalarField:
    return Bump(as_field(f), float(r0), float(r1))


def uses_radial_outside_bump(node: ScalarField, inside: bool = False) -> bool:
    """True when ``r`` appears anywhere other than as the argument of ``bump``."""
    if isinstance(node, Radial):
        return not inside
    if isinstance(node, Bump):
        return uses_radial_outside_bump(node.arg, inside=isinstance(node.arg, Radial))
    for child in children(node):
        if uses_radial_outside_bump(child, inside=False):
            return True
    return False


def children(node: ScalarField) -> list[ScalarField]:
    if isinstance(node, (Neg,)):
        return [node.arg]
    if isinstance(node, BinOp):
        return [node.left, node.right]
    if isinstance(node, Pow):
        return [node.base]
    if isinstance(node, (Call, Bump)):
        return [node.arg]
    return []
