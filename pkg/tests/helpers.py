"""Random periodic fields on T^n for the property suites."""
from __future__ import annotations

import math

import numpy as np

from flatcs.expr import TrigSeries
from flatcs.forms import VForm
from flatcs.gauge import gauge_field
from flatcs.groupfields import Constant, QExp
from flatcs.lie import LieAlgebraSpec

SU2 = LieAlgebraSpec.su2()


def trig(n: int, rng, amplitude: float = 0.5, bandwidth: int = 1, terms: int = 6) -> TrigSeries:
    return TrigSeries.random(n, bandwidth, rng, amplitude, terms=terms)


def random_connection(spec: LieAlgebraSpec, n: int, rng, amplitude: float = 0.5) -> VForm:
    return gauge_field({a: [trig(n, rng, amplitude) for _ in range(spec.dim)] for a in range(n)}, n, spec)


def random_algebra_field(spec: LieAlgebraSpec, n: int, rng, amplitude: float = 0.5) -> VForm:
    return VForm.algebra_field([trig(n, rng, amplitude) for _ in range(spec.dim)], n, spec)


def random_group_field(spec: LieAlgebraSpec, n: int, rng, amplitude: float = 0.8):
    """A product of two exponentials, so the field is not a one-parameter family."""
    first = QExp(spec, [trig(n, rng, amplitude) for _ in range(spec.dim)])
    second = QExp(spec, [trig(n, rng, amplitude) for _ in range(spec.dim)])
    return first * second


def random_constant(spec: LieAlgebraSpec, rng) -> Constant:
    return Constant(spec, tuple(spec.random_group(rng).tolist()))


def flat_constant_connection(spec: LieAlgebraSpec, n: int, rng) -> VForm:
    """Constant multiples of one algebra element on every axis: commuting, hence flat."""
    X = spec.random_algebra(rng)
    values = np.array([rng.uniform(-0.5, 0.5) * X for _ in range(n)])
    return VForm.constant(n, 1, values, spec)


def closed_form_abelian_cs(build, scale: float = 1.0):
    """``int <A ^ dA>`` for ``A = i sum_a f_a dx_a`` on T^3 by exact symbolic integration.

    ``build`` maps the sympy coordinates ``(x0, x1, x2)`` to the three coefficients.
    Returns the float value and the exact value divided by pi^3.
    """
    import sympy as sp

    x = sp.symbols("x0:3", real=True)
    f = list(build(x))
    eps = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}
    dens = sum(s * f[a] * sp.diff(f[c], x[b]) for (a, b, c), s in eps.items())
    total = sp.integrate(dens, (x[0], 0, 2 * sp.pi), (x[1], 0, 2 * sp.pi), (x[2], 0, 2 * sp.pi))
    return float(scale * total), sp.nsimplify(total / sp.pi**3)


def matrix_theta(X, Y, Z) -> float:
    """``-<X, [Y, Z]>`` at unit scale through the 2x2 complex matrix model of su(2)."""
    basis = [np.array([[1j, 0], [0, -1j]]), np.array([[0, 1], [-1, 0]], complex), np.array([[0, 1j], [1j, 0]])]

    def m(v):
        return sum(c * b for c, b in zip(v, basis))

    def inner(a, b):
        return float(-0.5 * np.trace(a @ b).real)

    Ym, Zm = m(Y), m(Z)
    return -inner(m(X), Ym @ Zm - Zm @ Ym)


TWO_PI = 2 * math.pi
