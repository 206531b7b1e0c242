"""Almost-periodic boundary data from an irrational slice.

A Z^2-periodic function restricted to a line with irrational slope is a
trigonometric polynomial with incommensurate frequencies.  It has no period,
only delta-almost periods, and those are relatively dense.  To compute on a
periodic grid the frequencies are snapped to a lattice, at a reported cost.
"""

import math

import numpy as np

from dtnhomog.almostperiodic import find_almost_periods, periodic_trig, round_to_torus, slice_periodic

G = periodic_trig([1.0, 1.0], [[1, 0], [0, 1]])
nu = np.array([1.0, math.sqrt(2)]) / math.sqrt(3)
g = slice_periodic(G, nu)
print("slice frequencies / 2 pi:", g.frequencies[:, 0] / (2 * math.pi))

found = find_almost_periods(g, 0.3, 60.0)
taus = found.taus()[:, 0]
# keep one representative per cluster of neighbouring hits
reps = taus[np.r_[True, np.diff(taus) > 0.1]]
print("0.3-almost periods in [0, 60]:", np.round(reps, 3))
print("relatively dense:", not found.sparse)

for L in (10.0, 40.0, 160.0):
    gr, err = round_to_torus(g, L)
    x = np.linspace(-L / 2, L / 2, 4001)
    drift = np.abs(gr(x) - g(x)).max()
    print(f"L={L:6.1f}  rounding bound {err:.3f}  sampled drift {drift:.3f}")
