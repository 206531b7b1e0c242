"""Dirichlet-to-Neumann maps of the strip and probes of their structure.

``apply_dtn`` solves the Dirichlet problem with data ``phi`` on the bottom
layer and zero on top, then returns the interior-normal derivative at the
bottom.  With a Pucci operator in place of ``F`` the same map gives the
extremal envelopes ``M^{r,+}`` and ``M^{r,-}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BumpDoesNotFit, NotLinear
from .grid import BoundaryField, StripGrid, boundary_from_function, normal_derivative_at_boundary
from .operators import EllipticOperator, pucci_minus, pucci_plus
from .solver import SolveConfig, solve_dirichlet


@dataclass(frozen=True, eq=False)
class DtNOperator:
    op: EllipticOperator
    grid: StripGrid
    cfg: SolveConfig = field(default_factory=SolveConfig)

    @property
    def r(self) -> float:
        return self.grid.depth_r

    def __call__(self, phi: BoundaryField) -> BoundaryField:
        return apply_dtn(self, phi)

    def with_operator(self, op: EllipticOperator) -> "DtNOperator":
        return DtNOperator(op, self.grid, self.cfg)

    def with_grid(self, grid: StripGrid) -> "DtNOperator":
        return DtNOperator(self.op, grid, self.cfg)


def extremal_pair(D: DtNOperator) -> tuple[DtNOperator, DtNOperator]:
    """``(M^{r,+}, M^{r,-})`` sharing grid, solver settings and constants with ``D``."""
    lam, Lam = D.op.lam, D.op.Lam
    return D.with_operator(pucci_plus(lam, Lam)), D.with_operator(pucci_minus(lam, Lam))


def apply_dtn(D: DtNOperator, phi: BoundaryField, initial=None) -> BoundaryField:
    """Interior-normal derivative of the Dirichlet solution with bottom data ``phi``.

    Raises :class:`NotConverged` if the underlying solve fails.
    """
    if not np.all(np.isfinite(phi.values)):
        raise ValueError("boundary data must be finite")
    phi = BoundaryField(D.grid, phi.values)
    res = solve_dirichlet(D.op, D.grid, phi, D.cfg, initial=initial).require()
    return normal_derivative_at_boundary(res.field)


# ---------------------------------------------------------------------------
# linear kernel


@dataclass(frozen=True)
class KernelEstimate:
    """Dense matrix of a linear DtN map and summary statistics.

    Row ``i`` is the evaluation point, column ``j`` the source point.
    ``zeroth_order`` is the mean row sum; ``decay_fit_exponent`` is the slope
    of ``log |K(0, j)|`` against ``log dist(0, j)``.
    """

    matrix: np.ndarray
    zeroth_order: float
    row_sums: np.ndarray
    offdiag_min: float
    symmetry_defect: float
    decay_fit_exponent: float
    fit_window: tuple[float, float]


def wrapped_distance(grid: StripGrid, center=None) -> np.ndarray:
    """Periodic distance from ``center`` (default the origin) to each boundary node."""
    pts = grid.boundary_points()
    c = np.zeros(grid.boundary_dim) if center is None else np.broadcast_to(center, (grid.boundary_dim,))
    L = grid.tangential_period_L
    delta = np.abs(pts - c) % L
    delta = np.minimum(delta, L - delta)
    return np.sqrt((delta**2).sum(axis=-1))


def assemble_linear_dtn_matrix(D: DtNOperator, fit_window: tuple[float, float] | None = None) -> KernelEstimate:
    """Probe a linear DtN map column by column with indicator data.

    The decay exponent is fitted over wrapped distances in ``fit_window``
    (default: from two cells out to a quarter period).
    """
    if not D.op.is_linear:
        raise NotLinear(f"kernel assembly needs a linear operator, got {D.op.kind}")
    grid = D.grid
    n = int(np.prod(grid.boundary_shape))
    K = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        col = apply_dtn(D, BoundaryField(grid, e.reshape(grid.boundary_shape)))
        K[:, j] = col.values.ravel()
    off = K - np.diag(np.diag(K))
    offdiag_min = float(off[~np.eye(n, dtype=bool)].min())
    row_sums = K.sum(axis=1)
    scale = float(np.max(np.abs(K)))
    sym = float(np.max(np.abs(K - K.T)) / scale)

    if fit_window is None:
        fit_window = (2.0 * grid.h_t, grid.tangential_period_L / 4.0)
    dist = wrapped_distance(grid).ravel()
    row0 = np.abs(K[0])
    sel = (dist >= fit_window[0] - 1e-12) & (dist <= fit_window[1] + 1e-12) & (row0 > 0)
    slope = float(np.polyfit(np.log(dist[sel]), np.log(row0[sel]), 1)[0]) if sel.sum() >= 2 else float("nan")
    return KernelEstimate(K, float(row_sums.mean()), row_sums, offdiag_min, sym, slope, tuple(fit_window))


# ---------------------------------------------------------------------------
# random data and bumps


def random_trig_field(grid: StripGrid, rng: np.random.Generator, n_modes: int = 4,
                      amplitude: float = 1.0, max_wavenumber: int = 4) -> BoundaryField:
    """Random smooth periodic field: a few cosines with integer wave numbers on the torus."""
    L = grid.tangential_period_L
    d = grid.boundary_dim
    ks = rng.integers(-max_wavenumber, max_wavenumber + 1, size=(n_modes, d))
    ks[np.all(ks == 0, axis=1), 0] = 1
    amps = rng.uniform(-amplitude, amplitude, n_modes) / n_modes
    phases = rng.uniform(0, 2 * np.pi, n_modes)
    offset = rng.uniform(-amplitude, amplitude) / n_modes

    def f(x):
        x = np.asarray(x)
        if d == 1:
            x = x[..., None]
        out = np.full(x.shape[:-1], offset)
        for k, a, th in zip(ks, amps, phases):
            out = out + a * np.cos(2 * np.pi / L * (x @ k) + th)
        return out

    return boundary_from_function(grid, f)


def phi_one(s):
    """``|x|^2 / (1 + |x|^2)`` as a function of ``s = |x|``."""
    s2 = np.asarray(s) ** 2
    return s2 / (1.0 + s2)


def auxiliary_bump(grid: StripGrid, R: float, center=None) -> BoundaryField:
    """``phi_1(x / R)`` on the torus, using the periodized distance to ``center``."""
    if not 0.5 <= R <= grid.tangential_period_L / 4 + 1e-12:
        raise BumpDoesNotFit(
            f"R={R} outside [1/2, L/4] = [0.5, {grid.tangential_period_L / 4:.3g}]"
        )
    return BoundaryField(grid, phi_one(wrapped_distance(grid, center) / R))


def touching_bump(grid: StripGrid, x0_index, R: float, height: float = 1.0) -> BoundaryField:
    """Nonnegative bump vanishing exactly at node ``x0_index`` (no range restriction on ``R``)."""
    center = np.asarray(x0_index, dtype=float) * grid.h_t
    vals = height * phi_one(wrapped_distance(grid, center) / R)
    vals[tuple(np.atleast_1d(x0_index))] = 0.0
    return BoundaryField(grid, vals)


# ---------------------------------------------------------------------------
# structural probes


@dataclass(frozen=True)
class GCPReport:
    trials: int
    max_violation: float
    violations: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def gcp_probe(D: DtNOperator, trials: int, seed: int = 0, tol: float | None = None) -> GCPReport:
    """Global comparison: if ``u <= v`` touch at ``x0`` then ``I(u, x0) <= I(v, x0)``.

    ``v`` is built as ``u + bump`` with a bump vanishing at a random node.
    Violations are ``I(u, x0) - I(v, x0)``; those above ``tol`` (default
    ``10 h**2``) are counted.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = D.grid
    rng = np.random.default_rng(seed)
    if tol is None:
        tol = 10.0 * grid.h**2
    worst = -np.inf
    count = 0
    for _ in range(trials):
        u = random_trig_field(grid, rng)
        x0 = tuple(int(i) for i in rng.integers(0, grid.n_tangential, grid.boundary_dim))
        R = rng.uniform(2 * grid.h_t, grid.tangential_period_L / 4)
        bump = touching_bump(grid, x0, R, height=rng.uniform(0.1, 1.0))
        Iu = apply_dtn(D, u)
        Iv = apply_dtn(D, u + bump)
        viol = float(Iu.values[x0] - Iv.values[x0])
        worst = max(worst, viol)
        count += viol > tol
    return GCPReport(trials, worst, int(count), tol)


def extremal_sandwich_defect(D_F: DtNOperator, D_plus: DtNOperator, D_minus: DtNOperator,
                             u: BoundaryField, v: BoundaryField) -> float:
    """Largest pointwise violation of ``M-(u-v) <= I(u) - I(v) <= M+(u-v)`` (negative if strict)."""
    diff = apply_dtn(D_F, u) - apply_dtn(D_F, v)
    w = u - v
    upper = apply_dtn(D_plus, w)
    lower = apply_dtn(D_minus, w)
    return float(max(np.max(diff.values - upper.values), np.max(lower.values - diff.values)))


def extremal_sandwich_check(D_F: DtNOperator, D_plus: DtNOperator, D_minus: DtNOperator,
                            u: BoundaryField, v: BoundaryField, tol: float | None = None) -> bool:
    for other in (D_plus, D_minus):
        if other.grid != D_F.grid or (other.op.lam, other.op.Lam) != (D_F.op.lam, D_F.op.Lam):
            raise ValueError("extremal operators must share grid and ellipticity constants with F")
    if tol is None:
        tol = 20.0 * D_F.grid.h**2
    return extremal_sandwich_defect(D_F, D_plus, D_minus, u, v) <= tol


@dataclass(frozen=True)
class AuxiliaryBoundReport:
    """Sizes of ``M^{r,+-}(phi_R)`` over a list of radii.

    ``m_sup`` is the sup norm over the boundary, ``m_upper`` the largest
    value (``max(sup M, 0)``).  ``norm`` says which one the pass flags use.
    """

    R: tuple
    m_sup: dict
    m_upper: dict
    norm: str
    C_emp: float
    ratios: dict
    max_ratio: float
    decay_ok: bool

    @property
    def passed(self) -> bool:
        return self.decay_ok


def auxiliary_bound_check(D_plus: DtNOperator, D_minus: DtNOperator, R_list,
                          norm: str = "sup", max_ratio: float = 0.75) -> AuxiliaryBoundReport:
    """Measure how ``M^{r,+-}(phi_R)`` scales with ``R``.

    ``norm="sup"`` uses ``||M(phi_R)||_inf``; ``norm="upper"`` uses the
    one-sided size ``max(sup_x M(phi_R, x), 0)``.  ``C_emp`` is the largest
    ``m(R) * R`` seen; the decay flag requires ``m(2R) <= max_ratio * m(R)``
    for consecutive radii.
    """
    if norm not in ("sup", "upper"):
        raise ValueError("norm must be 'sup' or 'upper'")
    R_list = tuple(sorted(float(R) for R in R_list))
    m_sup = {"+": [], "-": []}
    m_upper = {"+": [], "-": []}
    for R in R_list:
        bump = auxiliary_bump(D_plus.grid, R)
        for key, D in (("+", D_plus), ("-", D_minus)):
            out = apply_dtn(D, bump).values
            m_sup[key].append(float(np.max(np.abs(out))))
            m_upper[key].append(float(max(out.max(), 0.0)))
    m = m_sup if norm == "sup" else m_upper
    C_emp = max(mm * R for key in m for mm, R in zip(m[key], R_list))
    ratios = {key: [b / a if a > 0 else 0.0 for a, b in zip(m[key][:-1], m[key][1:])] for key in m}
    worst = max((x for key in ratios for x in ratios[key]), default=0.0)
    return AuxiliaryBoundReport(R_list, m_sup, m_upper, norm, C_emp, ratios, worst, worst <= max_ratio)
