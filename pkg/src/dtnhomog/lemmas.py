"""Randomized numerical checks of the structural identities of the DtN map.

Each check returns a :class:`LemmaCheck` with the largest defect seen, the
tolerance it is held to and a pass flag.  Checks are keyed by the labels
accepted on the command line (see :data:`CHECKS`).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dtn import (
    DtNOperator,
    apply_dtn,
    auxiliary_bound_check,
    extremal_pair,
    extremal_sandwich_defect,
    random_trig_field,
    touching_bump,
)
from .grid import BoundaryField, StripGrid, restrict_to_boundary
from .operators import EllipticOperator
from .solver import SolveConfig, solve_neumann


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    max_defect: float
    tolerance: float
    passed: bool
    trials: int
    note: str = ""

    def to_json(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def _check(name, defects, tol, note="") -> LemmaCheck:
    worst = float(np.max(defects)) if len(defects) else 0.0
    return LemmaCheck(name, worst, float(tol), bool(worst <= tol), len(defects), note)


def check_sandwich(D: DtNOperator, trials: int = 10, seed: int = 0, tol: float | None = None) -> LemmaCheck:
    """``M-(u - v) <= I(u) - I(v) <= M+(u - v)`` pointwise on random pairs."""
    rng = np.random.default_rng(seed)
    Dp, Dm = extremal_pair(D)
    tol = 20 * D.grid.h**2 if tol is None else tol
    defects = [extremal_sandwich_defect(D, Dp, Dm, random_trig_field(D.grid, rng), random_trig_field(D.grid, rng))
               for _ in range(trials)]
    return _check("sandwich", defects, tol)


def check_homogeneity(D: DtNOperator, trials: int = 5, seed: int = 0, factors=(0.5, 2.0, 10.0)) -> LemmaCheck:
    """``I(c phi) = c I(phi)``; defects are relative to ``c ||phi||``."""
    rng = np.random.default_rng(seed)
    defects = []
    for _ in range(trials):
        phi = random_trig_field(D.grid, rng)
        base = apply_dtn(D, phi)
        for c in factors:
            diff = (apply_dtn(D, phi * c) - base * c).sup_norm()
            defects.append(diff / (c * phi.sup_norm()))
    return _check("homogeneity", defects, 1e-8, "relative to c*||phi||")


def check_translation(D: DtNOperator, trials: int = 5, seed: int = 0) -> LemmaCheck:
    """``I(phi(. + k h)) = I(phi)(. + k h)`` for random grid shifts."""
    rng = np.random.default_rng(seed)
    grid = D.grid
    defects = []
    for _ in range(trials):
        phi = random_trig_field(grid, rng)
        k = tuple(int(i) for i in rng.integers(1, grid.n_tangential, grid.boundary_dim))
        defects.append((apply_dtn(D, phi.shifted(k)) - apply_dtn(D, phi).shifted(k)).sup_norm())
    return _check("translation", defects, 10 * D.cfg.residual_tol)


def check_constant_shift(D: DtNOperator, trials: int = 5, seed: int = 0, constants=(-3.0, 1.0, 7.0)) -> LemmaCheck:
    """``I(phi + c) = I(phi) - c / r``."""
    rng = np.random.default_rng(seed)
    defects = []
    for _ in range(trials):
        phi = random_trig_field(D.grid, rng)
        base = apply_dtn(D, phi)
        for c in constants:
            defects.append((apply_dtn(D, phi + c) - (base - c / D.r)).sup_norm())
    return _check("constant-shift", defects, 10 * D.cfg.residual_tol)


def check_scaling(D: DtNOperator, eps: float = 0.125, trials: int = 3, seed: int = 0) -> LemmaCheck:
    """Two-grid test of the rescaling ``w(y) = phi(eps y) / eps``.

    ``phi`` lives on ``D``'s strip; ``w`` on the strip of depth ``r / eps``
    and period ``L / eps`` with the same node counts.  Both maps must return
    the same boundary values.
    """
    rng = np.random.default_rng(seed)
    fine = D.grid.scaled(1.0 / eps)
    D_fine = D.with_grid(fine)
    defects = []
    for _ in range(trials):
        phi = random_trig_field(D.grid, rng)
        g = apply_dtn(D, phi)
        w = BoundaryField(fine, phi.values / eps)
        defects.append(float(np.max(np.abs(apply_dtn(D_fine, w).values - g.values))))
    return _check("scaling", defects, 20 * D.grid.h**2)


def check_auxiliary(D: DtNOperator, R_list=None, norm: str = "sup") -> LemmaCheck:
    """Decay of ``M^{r,+-}(phi_R)`` under doubling of ``R``; defect is the worst ratio."""
    if R_list is None:
        top = D.grid.tangential_period_L / 4
        R_list = [R for R in (0.5, 1.0, 2.0, 4.0, 8.0) if R <= top]
    Dp, Dm = extremal_pair(D)
    rep = auxiliary_bound_check(Dp, Dm, R_list, norm=norm)
    return LemmaCheck("auxiliary", rep.max_ratio, 0.75, rep.passed, len(rep.R),
                      f"norm={norm}, C_emp={rep.C_emp:.4g}")


def check_comparison(op: EllipticOperator, grid: StripGrid, cfg: SolveConfig | None = None,
                     trials: int = 5, seed: int = 0) -> LemmaCheck:
    """If ``I(u) >= I(v)`` everywhere then ``u <= v``.

    Pairs are produced by Neumann solves with data ``g`` and ``g - bump``.
    """
    cfg = cfg or SolveConfig()
    rng = np.random.default_rng(seed)
    defects = []
    for _ in range(trials):
        g = random_trig_field(grid, rng)
        x0 = tuple(int(i) for i in rng.integers(0, grid.n_tangential, grid.boundary_dim))
        bump = touching_bump(grid, x0, rng.uniform(2 * grid.h_t, grid.tangential_period_L / 4))
        u = restrict_to_boundary(solve_neumann(op, grid, g, cfg).require().field)
        v = restrict_to_boundary(solve_neumann(op, grid, g - bump, cfg).require().field)
        defects.append(float(np.max(u.values - v.values)))
    return _check("comparison", defects, 20 * grid.h**2)


def check_depth_monotonicity(D: DtNOperator, depths=None, trials: int = 3, seed: int = 0) -> LemmaCheck:
    """``I^{r2}(u) >= I^{r1}(u)`` for ``u >= 0`` and ``r2 >= r1``."""
    rng = np.random.default_rng(seed)
    r0 = D.r
    depths = sorted(depths or (r0, 2 * r0, 4 * r0))
    maps = [D.with_grid(D.grid.with_depth(r)) for r in depths]
    h = max(m.grid.h for m in maps)
    defects = []
    for _ in range(trials):
        phi = random_trig_field(D.grid, rng)
        phi = phi - float(phi.values.min())
        outs = [apply_dtn(m, BoundaryField(m.grid, phi.values)).values for m in maps]
        defects.extend(float(np.max(a - b)) for a, b in zip(outs, outs[1:]))
    return _check("depth", defects, 20 * h**2)


_RUNNERS = {
    "sandwich": lambda D, n, seed: check_sandwich(D, n, seed),
    "homogeneity": lambda D, n, seed: check_homogeneity(D, n, seed),
    "translation": lambda D, n, seed: check_translation(D, n, seed),
    "constant-shift": lambda D, n, seed: check_constant_shift(D, n, seed),
    "scaling": lambda D, n, seed: check_scaling(D, trials=n, seed=seed),
    "auxiliary": lambda D, n, seed: check_auxiliary(D),
    "comparison": lambda D, n, seed: check_comparison(D.op, D.grid, D.cfg, n, seed),
    "depth": lambda D, n, seed: check_depth_monotonicity(D, trials=n, seed=seed),
}
CHECKS = tuple(_RUNNERS)


def verify_lemmas(D: DtNOperator, labels=CHECKS, seeds: int = 3, seed: int = 0) -> dict:
    """Run the requested checks; ``seeds`` sets the trial count of each randomized one."""
    unknown = [x for x in labels if x not in _RUNNERS]
    if unknown:
        raise ValueError(f"unknown check(s) {unknown}; choose from {', '.join(CHECKS)}")
    return {x: _RUNNERS[x](D, seeds, seed) for x in labels}
