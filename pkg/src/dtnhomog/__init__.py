"""Dirichlet-to-Neumann maps on strips and homogenization of oscillating Neumann data."""

from .almostperiodic import TrigPolynomial, find_almost_periods, round_to_torus, slice_periodic, two_frequency_datum
from .dtn import DtNOperator, apply_dtn, assemble_linear_dtn_matrix, extremal_pair, gcp_probe
from .exceptions import *  # noqa: F403
from .grid import BoundaryField, BulkField, StripGrid, make_grid, normal_derivative_at_boundary, restrict_to_boundary
from .homog import EpsilonSweep, HomogReport, run_sweep
from .operators import EllipticOperator, bellman, evaluate_F, laplacian, linear, pucci_minus, pucci_plus
from .solver import SolveConfig, SolveResult, solve_dirichlet, solve_neumann

__version__ = "0.1.0"
