"""Epsilon sweeps of the oscillating Neumann problem and the effective constant.

For each dyadic ``eps`` the Neumann problem on the unit strip is solved with
data ``g(x / eps)``; its boundary trace ``v_eps`` should flatten to the
constant ``Ibar0`` as ``eps -> 0``, and the effective Neumann datum is
``gbar = -Ibar0`` (the normal derivative of ``Ibar0 * (1 - X.nu)``).

The datum ``g`` is snapped onto the torus of length ``L / eps_max`` so that
``g(x / eps)`` is exactly ``L``-periodic for every ``eps`` in the sweep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .almostperiodic import TrigPolynomial, find_almost_periods, round_to_torus
from .dtn import DtNOperator, apply_dtn
from .exceptions import IncompatibleEpsilon
from .grid import BoundaryField, BulkField, StripGrid, boundary_from_function, make_grid, restrict_to_boundary
from .operators import EllipticOperator, pucci_minus, pucci_plus
from .solver import SolveConfig, solve_neumann

log = logging.getLogger(__name__)

DEFAULT_EPSILONS = (1 / 4, 1 / 8, 1 / 16, 1 / 32)
DEFAULT_GAMMAS = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True, eq=False)
class EpsilonSweep:
    epsilons: tuple
    base_grid: StripGrid
    g: TrigPolynomial
    op: EllipticOperator
    refine_with_eps: bool = True
    points_per_wavelength: int = 16

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise ValueError("need at least one epsilon")
        if any(not 0 < e <= 0.5 for e in eps):
            raise ValueError("epsilons must lie in (0, 1/2]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        for e in eps:
            ratio = eps[0] / e
            if abs(ratio - round(ratio)) > 1e-9:
                raise IncompatibleEpsilon(f"eps_max / eps = {ratio} is not an integer for eps={e}")
        if self.g.dim != self.base_grid.boundary_dim:
            raise ValueError("datum dimension does not match the grid")
        object.__setattr__(self, "epsilons", eps)

    @property
    def micro_period(self) -> float:
        return self.base_grid.tangential_period_L / self.epsilons[0]

    def rounded_g(self) -> tuple[TrigPolynomial, float]:
        return round_to_torus(self.g, self.micro_period)

    def grid_for(self, eps: float) -> StripGrid:
        base = self.base_grid
        if not self.refine_with_eps:
            return base
        g, _ = self.rounded_g()
        L = base.tangential_period_L
        scale = int(round(self.epsilons[0] / eps))
        waves = L * g.max_frequency() / (2 * math.pi * eps)
        n_t = max(base.n_tangential * scale, int(math.ceil(self.points_per_wavelength * waves)))
        n_t += n_t % 2
        h_t = L / n_t
        n_n = max(base.n_normal, int(math.ceil(base.depth_r / h_t)) + 1)
        return make_grid(base.depth_r, L, n_t, n_n, base.boundary_dim, tangential_order=base.tangential_order)

    def data_for(self, eps: float, grid: StripGrid | None = None) -> BoundaryField:
        g, _ = self.rounded_g()
        grid = grid or self.grid_for(eps)
        return boundary_from_function(grid, lambda x: g(np.asarray(x) / eps))


@dataclass
class EpsilonRecord:
    eps: float
    grid: StripGrid
    converged: bool
    iterations: int
    osc_v: float = float("nan")
    mean_v: float = float("nan")
    sup_v: float = float("nan")
    g_sup: float = float("nan")
    bound_check: bool = False
    eps_w_decay: float = float("nan")
    dtn_defect: float = float("nan")
    holder_quotient: float = float("nan")
    holder_gamma: float = float("nan")
    v: BoundaryField | None = field(default=None, repr=False)
    u: BulkField | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "eps": self.eps,
            "n_t": self.grid.n_tangential,
            "n_n": self.grid.n_normal,
            "converged": self.converged,
            "osc_v": self.osc_v,
            "mean_v": self.mean_v,
            "sup_v": self.sup_v,
            "bound_check": self.bound_check,
            "eps_w_decay": self.eps_w_decay,
            "dtn_defect": self.dtn_defect,
            "holder_quotient": self.holder_quotient,
            "holder_gamma": self.holder_gamma,
            "iterations": self.iterations,
        }


@dataclass
class HomogReport:
    per_eps: list
    Ibar0_raw: float
    Ibar0_extrapolated: float
    uniqueness_spread: float
    profile_defect: float
    rounding_error: float
    config_echo: dict = field(default_factory=dict)
    pass_flags: dict = field(default_factory=dict)

    @property
    def Ibar0(self) -> float:
        return self.Ibar0_extrapolated

    @property
    def gbar(self) -> float:
        return -self.Ibar0_extrapolated

    @property
    def epsilons(self) -> list:
        return [rec.eps for rec in self.per_eps]

    @property
    def osc(self) -> list:
        return [rec.osc_v for rec in self.per_eps]

    @property
    def finest(self) -> EpsilonRecord:
        return self.per_eps[-1]

    @property
    def h_finest(self) -> float:
        return self.finest.grid.h

    @property
    def passed(self) -> bool:
        return all(self.pass_flags.values())

    def to_json(self) -> dict:
        return {
            "config_echo": self.config_echo,
            "per_eps": [rec.summary() for rec in self.per_eps],
            "Ibar0_raw": self.Ibar0_raw,
            "Ibar0_extrapolated": self.Ibar0_extrapolated,
            "gbar": self.gbar,
            "uniqueness_spread": self.uniqueness_spread,
            "profile_defect": self.profile_defect,
            "rounding_error": self.rounding_error,
            "pass_flags": self.pass_flags,
        }


# ---------------------------------------------------------------------------
# helpers


def interpolate_field(u: BulkField, grid: StripGrid) -> np.ndarray:
    """Piecewise-linear transfer of a bulk field to another grid of the same strip."""
    old = u.grid
    if (old.depth_r, old.tangential_period_L, old.boundary_dim) != (
        grid.depth_r, grid.tangential_period_L, grid.boundary_dim
    ):
        raise ValueError("grids describe different strips")
    d = old.boundary_dim
    vals = u.values
    for ax in range(d):
        vals = np.concatenate([vals, np.take(vals, [0], axis=ax)], axis=ax)
    t_old = np.append(old.tangential_coords(), old.tangential_period_L)
    interp = RegularGridInterpolator([t_old] * d + [old.normal_coords()], vals)
    axes = [grid.tangential_coords()] * d + [grid.normal_coords()]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return interp(pts)


def holder_quotient(v: BoundaryField, gamma: float) -> float:
    """``sup |v(x) - v(y)| / dist(x, y)^gamma`` over grid pairs (wrapped distance, d=1)."""
    return float(np.max(_modulus(v) / _distances(v) ** gamma, initial=0.0))


def _distances(v: BoundaryField) -> np.ndarray:
    n = v.grid.n_tangential
    k = np.arange(1, n // 2 + 1)
    return k * v.grid.h_t


def _modulus(v: BoundaryField) -> np.ndarray:
    """``max_x |v(x + k h) - v(x)|`` for ``k = 1 .. n/2`` (tangential axis 0; all axes for d=2)."""
    vals = v.values
    n = v.grid.n_tangential
    out = np.zeros(n // 2)
    for k in range(1, n // 2 + 1):
        diffs = [np.max(np.abs(np.roll(vals, -k, axis=ax) - vals)) for ax in range(vals.ndim)]
        out[k - 1] = max(diffs)
    return out


def holder_exponent_fit(v: BoundaryField, cells: int = 10) -> float:
    """Slope of ``log modulus`` against ``log distance`` over the first ``cells`` separations."""
    mod = _modulus(v)[:cells]
    dist = _distances(v)[:cells]
    keep = mod > 0
    if keep.sum() < 2:
        return 1.0
    return float(np.polyfit(np.log(dist[keep]), np.log(mod[keep]), 1)[0])


def holder_diagnostic(v: BoundaryField, gamma_grid=DEFAULT_GAMMAS) -> float:
    """Empirical Hölder quotient at the grid exponent closest to the fitted local exponent."""
    return holder_diagnostic_with_gamma(v, gamma_grid)[0]


def holder_diagnostic_with_gamma(v: BoundaryField, gamma_grid=DEFAULT_GAMMAS) -> tuple[float, float]:
    if v.grid.n_tangential < 32:
        raise ValueError("Hölder diagnostic needs at least 32 boundary points")
    gammas = np.asarray(gamma_grid, dtype=float)
    slope = float(np.clip(holder_exponent_fit(v), gammas.min(), gammas.max()))
    gamma = float(gammas[np.argmin(np.abs(gammas - slope))])
    return holder_quotient(v, gamma), gamma


def richardson(eps_small: float, m_small: float, eps_large: float, m_large: float) -> float:
    """Extrapolate ``m(eps) = m0 + c eps`` to ``eps = 0``."""
    return m_small + (m_small - m_large) * eps_small / (eps_large - eps_small)


def affine_profile(grid: StripGrid, c: float) -> BulkField:
    """``l_c(X) = c (1 - X.nu / r)``."""
    y = grid.normal_coords()
    vals = np.broadcast_to(c * (1.0 - y / grid.depth_r), grid.shape)
    return BulkField(grid, vals)


# ---------------------------------------------------------------------------
# the sweep


def run_sweep(s: EpsilonSweep, cfg: SolveConfig | None = None, warm_start: bool = True,
              check_dtn: bool = True, gamma_grid=DEFAULT_GAMMAS, keep_fields: bool = True) -> HomogReport:
    """Solve the Neumann problem for every ``eps`` and assemble the report.

    A non-converged ``eps`` is recorded (``converged=False``) and the sweep
    continues; the ``all_converged`` pass flag then fails.
    """
    cfg = cfg or SolveConfig()
    g_round, rounding_error = s.rounded_g()
    records = []
    prev = None
    for eps in s.epsilons:
        grid = s.grid_for(eps)
        data = s.data_for(eps, grid)
        initial = interpolate_field(prev, grid) if (warm_start and prev is not None) else None
        res = solve_neumann(s.op, grid, data, cfg, initial=initial)
        rec = EpsilonRecord(eps, grid, res.converged, res.iterations)
        log.info("eps=%g grid=%dx%d iterations=%d residual=%.2e", eps, grid.n_tangential,
                 grid.n_normal, res.iterations, res.final_residual)
        if not res.converged:
            log.warning("eps=%g did not converge (residual %.3e)", eps, res.final_residual)
        v = restrict_to_boundary(res.field)
        rec.osc_v = v.oscillation()
        rec.mean_v = v.mean()
        rec.sup_v = v.sup_norm()
        rec.g_sup = data.sup_norm()
        rec.bound_check = rec.sup_v <= rec.g_sup + 40 * grid.h**2
        rec.eps_w_decay = float(np.max(np.abs(v.values - v.values.flat[0])))
        if check_dtn and res.converged:
            D = DtNOperator(s.op, grid, cfg)
            rec.dtn_defect = (apply_dtn(D, v, initial=res.field) - data).sup_norm()
        if grid.n_tangential >= 32:
            rec.holder_quotient, rec.holder_gamma = holder_diagnostic_with_gamma(v, gamma_grid)
        if keep_fields:
            rec.v, rec.u = v, res.field
        records.append(rec)
        prev = res.field

    finest = records[-1]
    Ibar0_raw = finest.mean_v
    if len(records) >= 2:
        a, b = records[-1], records[-2]
        Ibar0 = richardson(a.eps, a.mean_v, b.eps, b.mean_v)
        spread = abs(a.mean_v - b.mean_v)
    else:
        Ibar0, spread = Ibar0_raw, 0.0
    profile = (finest.u - affine_profile(finest.grid, Ibar0)).sup_norm() if finest.u is not None else float("nan")

    report = HomogReport(
        per_eps=records,
        Ibar0_raw=Ibar0_raw,
        Ibar0_extrapolated=Ibar0,
        uniqueness_spread=spread,
        profile_defect=profile,
        rounding_error=rounding_error,
        config_echo={
            "epsilons": list(s.epsilons),
            "grid": s.base_grid.metadata(),
            "operator": {"kind": s.op.kind, "lambda": s.op.lam, "Lambda": s.op.Lam},
            "g_terms": len(s.g),
            "refine_with_eps": s.refine_with_eps,
            "points_per_wavelength": s.points_per_wavelength,
            "residual_tol": cfg.residual_tol,
            "L_micro": s.micro_period,
        },
    )
    h2 = report.h_finest**2
    flags = {
        "all_converged": all(r.converged for r in records),
        "global_bound": check_global_bound(report),
        "profile": bool(profile <= finest.osc_v + 40 * h2),
    }
    if check_dtn:
        flags["dtn_consistency"] = all(r.dtn_defect <= 40 * r.grid.h**2 for r in records)
    if len(records) >= 3:
        flags["decay"] = check_decay_lemma(report)
    quotients = [r.holder_quotient for r in records if np.isfinite(r.holder_quotient)]
    if len(quotients) >= 2 and min(quotients) > 0:
        flags["holder_bounded"] = bool(max(quotients) / min(quotients) <= 3.0)
    report.pass_flags = flags
    return report


def check_global_bound(report: HomogReport, g: TrigPolynomial | None = None) -> bool:
    """``||v_eps||_inf <= ||g||_inf + 40 h^2`` for every ``eps``.

    ``||g||_inf`` is the maximum of the sampled data unless ``g`` is given,
    in which case its coefficient bound ``sum |a_m|`` is used.
    """
    ok = True
    for rec in report.per_eps:
        bound = g.sup_bound() if g is not None else rec.g_sup
        ok &= rec.sup_v <= bound + 40 * rec.grid.h**2
    return bool(ok)


def uniqueness_threshold(report_a: HomogReport, report_b: HomogReport, g_sup: float) -> float:
    h = max(report_a.h_finest, report_b.h_finest)
    return max(5.0 * (report_a.epsilons[-1] + report_b.epsilons[-1]) * g_sup, 100 * h**2)


def check_uniqueness(report_a: HomogReport, report_b: HomogReport) -> float:
    """``|Ibar0_A - Ibar0_B|`` for sweeps along different epsilon sequences."""
    return abs(report_a.Ibar0 - report_b.Ibar0)


def check_decay_lemma(report: HomogReport, slack: float = 0.0) -> bool:
    """Oscillation of ``v_eps`` nonincreasing along the sweep and at least halved overall.

    ``slack`` allows each step to grow by a relative amount.
    """
    osc = report.osc
    if len(osc) < 3:
        raise ValueError("decay check needs at least three epsilons")
    monotone = all(b <= a * (1 + slack) + 1e-14 for a, b in zip(osc, osc[1:]))
    return bool(monotone and osc[-1] <= osc[0] / 2)


def check_profile(report: HomogReport, u_eps_min: BulkField | None = None) -> float:
    """``||u_eps_min - l_c||_inf`` with ``c = Ibar0``."""
    u = u_eps_min if u_eps_min is not None else report.finest.u
    if u is None:
        raise ValueError("no field stored for the smallest eps")
    return (u - affine_profile(u.grid, report.Ibar0)).sup_norm()


# ---------------------------------------------------------------------------
# derived experiments


def subsweep(s: EpsilonSweep, epsilons) -> EpsilonSweep:
    """Same problem along another epsilon sequence, keeping the rounding of ``s``.

    The datum is pre-rounded on ``s``'s micro torus so both sweeps see the
    same periodic ``g``.
    """
    g_round, _ = s.rounded_g()
    eps = tuple(sorted((float(e) for e in epsilons), reverse=True))
    for e in eps:
        ratio = s.epsilons[0] / e
        if abs(ratio - round(ratio)) > 1e-9:
            raise IncompatibleEpsilon(f"eps={e} incompatible with the rounding torus")
    return EpsilonSweep(eps, s.base_grid, g_round, s.op, s.refine_with_eps, s.points_per_wavelength)


def with_operator(s: EpsilonSweep, op: EllipticOperator) -> EpsilonSweep:
    return EpsilonSweep(s.epsilons, s.base_grid, s.g, op, s.refine_with_eps, s.points_per_wavelength)


def with_datum(s: EpsilonSweep, g: TrigPolynomial) -> EpsilonSweep:
    return EpsilonSweep(s.epsilons, s.base_grid, g, s.op, s.refine_with_eps, s.points_per_wavelength)


@dataclass(frozen=True)
class BracketResult:
    Ibar0_minus: float
    Ibar0_F: float
    Ibar0_plus: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.Ibar0_minus - self.tolerance <= self.Ibar0_F <= self.Ibar0_plus + self.tolerance


def pucci_bracket(s: EpsilonSweep, cfg: SolveConfig | None = None, report_F: HomogReport | None = None,
                  tol: float | None = None) -> BracketResult:
    """``Ibar0`` for ``F`` against the two Pucci operators with the same constants."""
    lam, Lam = s.op.lam, s.op.Lam
    rep_F = report_F or run_sweep(s, cfg, check_dtn=False)
    rep_m = rep_F if s.op.kind == "pucci-" else run_sweep(with_operator(s, pucci_minus(lam, Lam)), cfg, check_dtn=False)
    rep_p = rep_F if s.op.kind == "pucci+" else run_sweep(with_operator(s, pucci_plus(lam, Lam)), cfg, check_dtn=False)
    if tol is None:
        tol = 100 * rep_F.h_finest**2
    return BracketResult(rep_m.Ibar0, rep_F.Ibar0, rep_p.Ibar0, tol)


@dataclass(frozen=True)
class ShiftResult:
    Ibar0_1: float
    Ibar0_2: float
    c1: float
    c2: float
    defect: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.defect <= self.tolerance


def rhs_shift_consistency(s: EpsilonSweep, c1: float, c2: float, cfg: SolveConfig | None = None) -> ShiftResult:
    """Constants added to the Neumann datum pass through with coefficient -1.

    Compares ``Ibar0(g + c1) - Ibar0(g + c2)`` with ``c2 - c1``.
    """
    g_round, _ = s.rounded_g()
    base = subsweep(s, s.epsilons)
    r1 = run_sweep(with_datum(base, g_round.plus_constant(c1)), cfg, check_dtn=False)
    r2 = run_sweep(with_datum(base, g_round.plus_constant(c2)), cfg, check_dtn=False)
    defect = abs((r1.Ibar0 - r2.Ibar0) - (c2 - c1))
    return ShiftResult(r1.Ibar0, r2.Ibar0, c1, c2, defect, 100 * max(r1.h_finest, r2.h_finest) ** 2)


@dataclass(frozen=True)
class TransferResult:
    eps: float
    delta: float
    taus: np.ndarray
    shift_cells: np.ndarray
    shift_defects: np.ndarray
    tolerance: float

    @property
    def max_defect(self) -> float:
        return float(np.max(self.shift_defects, initial=0.0))

    @property
    def passed(self) -> bool:
        return bool(self.max_defect <= self.tolerance)


def almost_period_transfer(s: EpsilonSweep, eps: float, delta: float, v: BoundaryField | None = None,
                           cfg: SolveConfig | None = None, window: float | None = None) -> TransferResult:
    """Shift defects of ``v_eps`` along the grid-aligned ``delta``-almost periods of ``g``.

    Every almost period ``tau`` of the rounded datum should satisfy
    ``sup |v_eps(x + eps tau) - v_eps(x)| <= delta`` (plus ``40 h^2`` for
    discretization).  ``v`` is solved for when not supplied.
    """
    if s.g.dim != 1:
        raise NotImplementedError("almost-period transfer is implemented for d = 1")
    g_round, _ = s.rounded_g()
    grid = s.grid_for(eps)
    if v is None:
        res = solve_neumann(s.op, grid, s.data_for(eps, grid), cfg).require()
        v = restrict_to_boundary(res.field)
    if v.grid != grid:
        raise ValueError("v does not live on the sweep grid for this eps")
    step = grid.h_t / eps
    if window is None:
        window = grid.tangential_period_L / eps
    periods = find_almost_periods(g_round, delta, window, step=step)
    taus = periods.taus()[:, 0]
    cells = np.rint(taus * eps / grid.h_t).astype(int)
    defects = np.array([np.max(np.abs(np.roll(v.values, -k) - v.values)) for k in cells])
    return TransferResult(eps, delta, taus, cells, defects, delta + 40 * grid.h**2)
