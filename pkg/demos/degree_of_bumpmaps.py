"""Degrees of powers of a collapse map, by quadrature and by counting preimages."""
import numpy as np

from flatcs.groupfields import BumpMap, Power, brouwer_degree_oracle, degree_trivial
from flatcs.lie import LieAlgebraSpec

spec = LieAlgebraSpec.su2()
u = BumpMap(spec, 0.2, 3.0)
for m in range(-2, 4):
    um = Power(u, m)
    quad = degree_trivial(um, N=32)
    oracle = brouwer_degree_oracle(um, np.array([0.0, 0.6, 0.0, 0.8]))
    print(f"m={m:+d}  quadrature={quad:+.10f}  preimage count={oracle.degree:+d}")
