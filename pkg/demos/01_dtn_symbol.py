"""The linear DtN map on a strip, checked against its Fourier symbol.

For the Laplacian on a strip of depth r, a boundary mode cos(m x) is mapped
to -m coth(m r) cos(m x).  Deep strips approach the half-space symbol -|m|,
shallow ones are dominated by the zeroth-order term -1/r.
"""

import math

import numpy as np

from dtnhomog import DtNOperator, apply_dtn, make_grid
from dtnhomog.grid import boundary_from_function
from dtnhomog.operators import laplacian, pucci_plus

L = 2 * math.pi

print(" r    m   computed      exact     error")
for r in (0.5, 1.0, 4.0):
    grid = make_grid(r, L, 64, int(64 * r) + 1)
    D = DtNOperator(laplacian(), grid)
    for m in (1, 2, 4):
        phi = boundary_from_function(grid, lambda x: np.cos(m * x))
        out = apply_dtn(D, phi).values[0]
        exact = -m / math.tanh(m * r)
        print(f"{r:4.1f} {m:3d} {out:10.6f} {exact:10.6f} {abs(out - exact):9.2e}")

# the same map for a fully nonlinear operator: no symbol, but constants still
# go to -c / r and the map stays translation invariant
grid = make_grid(1.0, L, 64, 33)
D = DtNOperator(pucci_plus(1.0, 2.0), grid)
phi = boundary_from_function(grid, lambda x: np.cos(x) + 0.3 * np.sin(3 * x))
I = apply_dtn(D, phi)
print("\nPucci+ image of cos(x) + 0.3 sin(3x): min %.4f max %.4f" % (I.values.min(), I.values.max()))
print("constant 2 ->", apply_dtn(D, phi * 0 + 2.0).values[:3])
