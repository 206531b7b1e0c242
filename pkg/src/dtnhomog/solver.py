"""Discrete Dirichlet and Neumann problems on the strip.

Both problems share the interior equation ``F(D^2 u) = 0`` and the far
condition ``u = 0`` on the top layer.  The bottom layer carries either
Dirichlet data ``u = phi`` or the Neumann row

    (-3 u_0 + 4 u_1 - u_2) / (2 h_n) = g,

which is exactly the stencil of :func:`grid.normal_derivative_at_boundary`,
so a Neumann solution fed back through the Dirichlet-to-Neumann map
reproduces ``g`` up to solver tolerance.

Two iterations are available.  ``method="explicit"`` is the damped
pseudo-time scheme ``u <- u + tau F(D^2 u)`` with boundary rows pinned (and
the Neumann ghost update ``u_0 <- (4 u_1 - u_2 - 2 h_n g) / 3``).  The default
``method="newton"`` freezes the coefficient matrix ``A(D^2 u)`` from
:func:`operators.policy` and solves the resulting sparse linear system; for a
linear ``F`` that is a single factorization, which is cached per operator and
grid.
"""

from __future__ import annotations

import logging
import weakref
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NotConverged
from .grid import BoundaryField, BulkField, StripGrid, restrict_to_boundary
from .operators import EllipticOperator, discrete_hessians, evaluate_F, hessian_stencils, interior_shift, policy

log = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class SolveConfig:
    """Solver controls.

    ``damping_tau=None`` selects ``h**2 / (4 Lambda (d + 1))`` with ``h`` the
    finer spacing.  ``max_iters`` bounds explicit sweeps, ``max_newton``
    bounds Newton steps.
    """

    residual_tol: float = 1e-9
    max_iters: int = 2_000_000
    damping_tau: float | None = None
    verbose_every: int = 0
    method: str = "newton"
    max_newton: int = 60
    burn_in: int = 10

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.method not in ("newton", "explicit"):
            raise ValueError(f"unknown method {self.method!r}")

    def tau_for(self, op: EllipticOperator, grid: StripGrid) -> float:
        h = min(grid.h_t, grid.h_n)
        bound = h**2 / (2 * op.Lam * (grid.boundary_dim + 1))
        if self.damping_tau is None:
            return 0.5 * bound
        if not 0 < self.damping_tau <= bound:
            raise ValueError(f"damping_tau must lie in (0, {bound:.3e}] for this grid")
        return self.damping_tau


@dataclass(frozen=True)
class SolveResult:
    field: BulkField
    iterations: int
    final_residual: float
    converged: bool
    bc_defect: float = 0.0
    residual_history: tuple = field(default=(), repr=False)
    message: str = ""

    def require(self) -> "SolveResult":
        """Return ``self`` or raise :class:`NotConverged`."""
        if not self.converged:
            raise NotConverged(
                f"solve did not converge: residual {self.final_residual:.3e} after "
                f"{self.iterations} iterations ({self.message})",
                self,
            )
        return self


# ---------------------------------------------------------------------------
# sparse assembly


def _node_index(grid: StripGrid) -> np.ndarray:
    return np.arange(grid.size).reshape(grid.shape)


def assemble_system(grid: StripGrid, coeffs: np.ndarray, problem: str) -> sp.csr_matrix:
    """Matrix of ``Tr(A D^2 u)`` on interior rows plus the boundary rows.

    ``coeffs`` has shape ``interior + (d+1, d+1)`` (or ``(d+1, d+1)`` for a
    constant coefficient).
    """
    idx = _node_index(grid)
    interior = idx[..., 1:-1]
    dim = grid.boundary_dim + 1
    coeffs = np.broadcast_to(coeffs, interior.shape + (dim, dim))
    rows, cols, vals = [], [], []
    for (p, q), entries in hessian_stencils(grid).items():
        c = coeffs[..., p, q] * (1.0 if p == q else 2.0)
        if not np.any(c):
            continue
        for off, w in entries:
            rows.append(interior.ravel())
            cols.append(interior_shift(idx, off).ravel())
            vals.append((w * c).ravel())
    bottom = idx[..., 0].ravel()
    top = idx[..., -1].ravel()
    rows.append(top)
    cols.append(top)
    vals.append(np.ones(top.size))
    if problem == DIRICHLET:
        rows.append(bottom)
        cols.append(bottom)
        vals.append(np.ones(bottom.size))
    elif problem == NEUMANN:
        s = 1.0 / (2.0 * grid.h_n)
        for layer, w in ((0, -3.0), (1, 4.0), (2, -1.0)):
            rows.append(bottom)
            cols.append(idx[..., layer].ravel())
            vals.append(np.full(bottom.size, w * s))
    else:
        raise ValueError(f"unknown problem {problem!r}")
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return M.tocsr()


def _rhs(grid: StripGrid, data: BoundaryField) -> np.ndarray:
    b = np.zeros(grid.shape)
    b[..., 0] = data.values
    return b.ravel()


_LU_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _linear_factor(op: EllipticOperator, grid: StripGrid, problem: str):
    per_op = _LU_CACHE.setdefault(op, {})
    key = (grid, problem)
    if key not in per_op:
        if len(per_op) > 16:
            per_op.clear()
        M = assemble_system(grid, op.matrices[0][0], problem)
        per_op[key] = spla.splu(M.tocsc())
    return per_op[key]


# ---------------------------------------------------------------------------
# residuals


def interior_residual(op: EllipticOperator, u: BulkField) -> np.ndarray:
    return evaluate_F(op, discrete_hessians(u))


def _bc_defect(u: np.ndarray, grid: StripGrid, data: BoundaryField, problem: str) -> float:
    top = float(np.max(np.abs(u[..., -1])))
    if problem == DIRICHLET:
        bottom = float(np.max(np.abs(u[..., 0] - data.values)))
    else:
        dn = (-3.0 * u[..., 0] + 4.0 * u[..., 1] - u[..., 2]) / (2.0 * grid.h_n)
        bottom = float(np.max(np.abs(dn - data.values)))
    return max(top, bottom)


def _bc_tolerance(grid: StripGrid, cfg: SolveConfig, problem: str) -> float:
    if problem == NEUMANN:
        return max(10.0 * grid.h_n**2, cfg.residual_tol)
    return cfg.residual_tol


# ---------------------------------------------------------------------------
# iterations


def _refined_solve(M: sp.csr_matrix, b: np.ndarray, steps: int = 2) -> np.ndarray:
    """Sparse LU solve plus iterative refinement.

    Without refinement the solve error on fine grids (~1e-10 in ``u``) shows
    up as ~1e-6 in the discrete Hessians and stalls the Newton residual.
    """
    lu = spla.splu(M.tocsc())
    x = lu.solve(b)
    for _ in range(steps):
        x = x + lu.solve(b - M @ x)
    return x


def _newton(op, grid, data, problem, cfg, u0) -> SolveResult:
    b = _rhs(grid, data)
    if op.is_linear:
        lu = _linear_factor(op, grid, problem)
        u = lu.solve(b)
        # one step of iterative refinement against the assembled operator
        field_ = BulkField(grid, u.reshape(grid.shape))
        res = interior_residual(op, field_)
        corr = np.zeros(grid.shape)
        corr[..., 1:-1] = res
        u = u - lu.solve(corr.ravel())
        field_ = BulkField(grid, u.reshape(grid.shape))
        res = float(np.max(np.abs(interior_residual(op, field_)), initial=0.0))
        bc = _bc_defect(field_.values, grid, data, problem)
        ok = res <= cfg.residual_tol and bc <= _bc_tolerance(grid, cfg, problem)
        return SolveResult(field_, 1, res, ok, bc, (res,), "direct solve")

    u = u0.copy()
    u[..., 0] = data.values if problem == DIRICHLET else u[..., 0]
    u[..., -1] = 0.0
    history = []
    res = np.inf
    polished = False
    for it in range(1, cfg.max_newton + 1):
        H = discrete_hessians(BulkField(grid, u))
        res_vec = evaluate_F(op, H)
        res = float(np.max(np.abs(res_vec), initial=0.0))
        history.append(res)
        if cfg.verbose_every and it % cfg.verbose_every == 0:
            log.info("newton %d: residual %.3e", it, res)
        if res <= cfg.residual_tol and it > 1:
            if polished:
                break
            polished = True
        A = policy(op, H)
        M = assemble_system(grid, A, problem)
        u_new = _refined_solve(M, b).reshape(grid.shape)
        # backtrack if the full step does not reduce the residual; fall back to
        # the full step when no damped step helps either
        step = u_new - u
        u_next = u_new
        theta = 1.0
        while theta >= 1.0 / 8:
            trial = u + theta * step
            r_trial = float(np.max(np.abs(interior_residual(op, BulkField(grid, trial))), initial=0.0))
            if r_trial <= max(res, cfg.residual_tol):
                u_next = trial
                break
            theta *= 0.5
        u = u_next
    else:
        H = discrete_hessians(BulkField(grid, u))
        res = float(np.max(np.abs(evaluate_F(op, H)), initial=0.0))
        history.append(res)
    field_ = BulkField(grid, u)
    bc = _bc_defect(u, grid, data, problem)
    ok = res <= cfg.residual_tol and bc <= _bc_tolerance(grid, cfg, problem)
    return SolveResult(field_, len(history), res, ok, bc, tuple(history), "newton")


def _explicit(op, grid, data, problem, cfg, u0) -> SolveResult:
    tau = cfg.tau_for(op, grid)
    u = u0.copy()
    u[..., -1] = 0.0
    h_n = grid.h_n

    def pin(u):
        if problem == DIRICHLET:
            u[..., 0] = data.values
        else:
            u[..., 0] = (4.0 * u[..., 1] - u[..., 2] - 2.0 * h_n * data.values) / 3.0

    pin(u)
    history = []
    res = np.inf
    message = "explicit"
    it = 0
    for it in range(1, cfg.max_iters + 1):
        F = evaluate_F(op, discrete_hessians(BulkField(grid, u)))
        res = float(np.max(np.abs(F), initial=0.0))
        history.append(res)
        if cfg.verbose_every and it % cfg.verbose_every == 0:
            log.info("sweep %d: residual %.3e", it, res)
        if res <= cfg.residual_tol:
            break
        if it > cfg.burn_in and res > history[-2] * (1.0 + 1e-6) + 1e-14:
            message = f"residual grew after burn-in at sweep {it}: {history[-2]:.3e} -> {res:.3e}"
            log.warning(message)
            break
        u[..., 1:-1] += tau * F
        pin(u)
    field_ = BulkField(grid, u)
    bc = _bc_defect(u, grid, data, problem)
    ok = res <= cfg.residual_tol and bc <= _bc_tolerance(grid, cfg, problem)
    return SolveResult(field_, it, res, ok, bc, tuple(history), message)


def _solve(op, grid, data, problem, cfg, initial):
    cfg = cfg or SolveConfig()
    if data.grid.boundary_shape != grid.boundary_shape:
        raise ValueError("boundary data does not match the grid")
    data = BoundaryField(grid, data.values)
    if initial is None:
        u0 = np.zeros(grid.shape)
    else:
        u0 = np.array(initial.values if isinstance(initial, BulkField) else initial, dtype=float)
        if u0.shape != grid.shape:
            raise ValueError(f"initial guess has shape {u0.shape}, expected {grid.shape}")
    if cfg.method == "explicit":
        return _explicit(op, grid, data, problem, cfg, u0)
    return _newton(op, grid, data, problem, cfg, u0)


def solve_dirichlet(op: EllipticOperator, grid: StripGrid, phi: BoundaryField,
                    cfg: SolveConfig | None = None, initial=None) -> SolveResult:
    """Solve ``F(D^2 u) = 0`` with ``u = phi`` on the bottom layer and ``u = 0`` on top.

    Returns a result with ``converged=False`` rather than raising; call
    :meth:`SolveResult.require` when convergence is mandatory.
    """
    return _solve(op, grid, phi, DIRICHLET, cfg, initial)


def solve_neumann(op: EllipticOperator, grid: StripGrid, g: BoundaryField,
                  cfg: SolveConfig | None = None, initial=None) -> SolveResult:
    """Solve ``F(D^2 u) = 0`` with normal derivative ``g`` on the bottom layer and ``u = 0`` on top."""
    return _solve(op, grid, g, NEUMANN, cfg, initial)


def comparison_fuzz(op: EllipticOperator, grid: StripGrid, phi1: BoundaryField, phi2: BoundaryField,
                    cfg: SolveConfig | None = None, tol: float | None = None) -> bool:
    """Whether ordered Dirichlet data ``phi1 <= phi2`` give ordered solutions."""
    cfg = cfg or SolveConfig()
    if np.any(phi1.values > phi2.values):
        raise ValueError("comparison_fuzz expects phi1 <= phi2 pointwise")
    u1 = solve_dirichlet(op, grid, phi1, cfg).require().field
    u2 = solve_dirichlet(op, grid, phi2, cfg).require().field
    if tol is None:
        tol = 10.0 * cfg.residual_tol
    return bool(np.all(u1.values <= u2.values + tol))


def boundary_trace(result: SolveResult) -> BoundaryField:
    return restrict_to_boundary(result.field)


def with_method(cfg: SolveConfig, method: str) -> SolveConfig:
    return replace(cfg, method=method)
