"""Assemble the linear DtN matrix and run the structural checks.

The matrix of a translation-invariant map on a periodic grid is circulant.
Its off-diagonal entries are nonnegative (comparison), its rows sum to the
image of the constant 1, and away from the diagonal it decays like |x|^-2,
the kernel of the half Laplacian.
"""

import math

import numpy as np

from dtnhomog import DtNOperator, make_grid
from dtnhomog.dtn import assemble_linear_dtn_matrix
from dtnhomog.lemmas import verify_lemmas
from dtnhomog.operators import laplacian, random_bellman

L = 2 * math.pi
grid = make_grid(4 * L, L, 64, 257)
est = assemble_linear_dtn_matrix(DtNOperator(laplacian(), grid))
print("row sum (should be -1/r = %.5f): %.5f" % (-1 / grid.depth_r, est.row_sums.mean()))
print("smallest off-diagonal entry: %.2e" % est.offdiag_min)
print("symmetry defect: %.2e" % est.symmetry_defect)
print("far-field decay exponent: %.3f" % est.decay_fit_exponent)

row = est.matrix[0, 1:17]
print("first row, off-diagonal:", np.array2string(row, precision=4))

# randomized checks for a Bellman operator
D = DtNOperator(random_bellman(np.random.default_rng(3), 2, 1.0, 2.0), make_grid(1.0, L, 32, 17))
for name, res in verify_lemmas(D, ["sandwich", "homogeneity", "translation", "constant-shift",
                                   "comparison", "depth"], seeds=2).items():
    print(f"{name:15s} defect {res.max_defect:.2e}  tol {res.tolerance:.2e}  {'ok' if res.passed else 'FAIL'}")
