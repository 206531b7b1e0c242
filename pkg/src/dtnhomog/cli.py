"""Command line entry point: ``dtnhomog {solve,dtn,ap,homogenize}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .almostperiodic import find_almost_periods, round_to_torus, slice_periodic
from .dtn import DtNOperator, apply_dtn, assemble_linear_dtn_matrix
from .exceptions import DtnHomogError
from .grid import BoundaryField, boundary_from_function, restrict_to_boundary
from .homog import DEFAULT_EPSILONS, EpsilonSweep, run_sweep
from .lemmas import CHECKS, verify_lemmas
from .solver import solve_dirichlet, solve_neumann

log = logging.getLogger("dtnhomog")


def _boundary_data(cfg: io.RunConfig, grid, override=None) -> BoundaryField:
    """Boundary data from ``--data``, ``data_file`` (field CSV) or ``g_file`` (polynomial, scaled by ``eps``)."""
    path = Path(override) if override else cfg.path("data_file")
    if path is not None:
        f = io.read_field(path, boundary=True)
        if f.grid.boundary_shape != grid.boundary_shape:
            raise ValueError("data file grid does not match the config grid")
        return BoundaryField(grid, f.values)
    if cfg.get("g_file") is not None:
        g = io.read_polynomial(cfg.path("g_file"))
        eps = cfg.number("eps", 1.0)
        return boundary_from_function(grid, lambda x: g(np.asarray(x) / eps))
    raise ValueError("no boundary data: give --data, data_file or g_file")


def cmd_solve(args) -> int:
    cfg = io.read_config(args.config)
    grid = cfg.grid()
    data = _boundary_data(cfg, grid, args.data)
    solve = solve_dirichlet if args.problem == "dirichlet" else solve_neumann
    res = solve(cfg.operator(), grid, data, cfg.solve_config())
    io.write_field(args.out, res.field)
    print(f"converged={res.converged} iterations={res.iterations} residual={res.final_residual:.3e} "
          f"bc_defect={res.bc_defect:.3e}")
    return 0 if res.converged else 1


def cmd_dtn(args) -> int:
    cfg = io.read_config(args.config)
    D = DtNOperator(cfg.operator(), cfg.grid(), cfg.solve_config())
    if args.apply:
        # the field file carries its own grid
        phi = io.read_field(args.apply, boundary=True)
        out = apply_dtn(D.with_grid(phi.grid), phi)
        if args.out:
            io.write_field(args.out, out)
        else:
            sys.stdout.write(io.field_to_csv(out))
        return 0
    if args.assemble_kernel:
        if not args.out:
            raise ValueError("--assemble-kernel needs --out")
        est = assemble_linear_dtn_matrix(D)
        io.write_kernel(args.out, est.matrix)
        print(f"zeroth_order={est.zeroth_order:.6g} offdiag_min={est.offdiag_min:.3e} "
              f"symmetry_defect={est.symmetry_defect:.3e} decay_exponent={est.decay_fit_exponent:.3f}")
        return 0
    labels = [x.strip() for x in args.verify_lemmas.split(",") if x.strip()]
    checks = verify_lemmas(D, labels, seeds=args.seeds, seed=cfg.integer("seed", 0))
    report = {k: v.to_json() for k, v in checks.items()}
    if args.report:
        io.write_json(args.report, report)
    for k, v in checks.items():
        print(f"{k}: max_defect={v.max_defect:.3e} tolerance={v.tolerance:.3e} {'PASS' if v.passed else 'FAIL'}")
    return 0 if all(v.passed for v in checks.values()) else 1


def cmd_ap(args) -> int:
    g = io.read_polynomial(args.input)
    if args.action == "slice":
        nu = [float(x) for x in args.nu.split(",")]
        out = slice_periodic(g, nu)
        _emit(args.out, out.to_csv())
    elif args.action == "round":
        out, err = round_to_torus(g, args.L)
        _emit(args.out, out.to_csv())
        print(f"rounding_error={err:.17g}", file=sys.stderr)
    else:
        periods = find_almost_periods(g, args.delta, args.window)
        rows = [{"tau": np.atleast_1d(p.tau).tolist(), "defect": p.defect} for p in periods]
        _emit(args.out, json.dumps({"delta": args.delta, "window": args.window, "sparse": periods.sparse,
                                    "periods": rows}, indent=2) + "\n")
    return 0


def _emit(path, text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_homogenize(args) -> int:
    cfg = io.read_config(args.config)
    grid = cfg.grid()
    g = io.read_polynomial(cfg.path("g_file"))
    eps = cfg.floats("epsilons") or list(DEFAULT_EPSILONS)
    sweep = EpsilonSweep(tuple(eps), grid, g, cfg.operator(), cfg.flag("refine_with_eps", True),
                         cfg.integer("points_per_wavelength", 16))
    report = run_sweep(sweep, cfg.solve_config())
    out = report.to_json()
    out["config_echo"]["config"] = dict(cfg.values)
    io.write_json(args.out, out)
    if args.fields_dir:
        d = Path(args.fields_dir)
        d.mkdir(parents=True, exist_ok=True)
        for rec in report.per_eps:
            if rec.u is not None:
                io.write_field(d / f"u_eps_{rec.eps:.6g}.csv", rec.u)
                io.write_field(d / f"v_eps_{rec.eps:.6g}.csv", restrict_to_boundary(rec.u))
    print(f"Ibar0={report.Ibar0:.10g} gbar={report.gbar:.10g} pass={report.passed}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtnhomog", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the Dirichlet or Neumann strip problem")
    s.add_argument("--problem", choices=("dirichlet", "neumann"), required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--data", help="boundary field CSV (overrides the config)")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("dtn", help="apply, assemble or check the Dirichlet-to-Neumann map")
    s.add_argument("--config", required=True)
    mode = s.add_mutually_exclusive_group(required=True)
    mode.add_argument("--apply", metavar="FIELD_CSV")
    mode.add_argument("--assemble-kernel", action="store_true")
    mode.add_argument("--verify-lemmas", metavar="LIST", help=f"comma list from: {','.join(CHECKS)}")
    s.add_argument("--out")
    s.add_argument("--seeds", type=int, default=3)
    s.add_argument("--report")
    s.set_defaults(func=cmd_dtn)

    s = sub.add_parser("ap", help="almost-periodic data utilities")
    s.add_argument("action", choices=("slice", "round", "periods"))
    s.add_argument("--in", dest="input", required=True, help="polynomial CSV")
    s.add_argument("--out")
    s.add_argument("--nu", help="unit normal, comma separated (slice)")
    s.add_argument("--L", type=float, help="torus length (round)")
    s.add_argument("--delta", type=float, help="tolerance (periods)")
    s.add_argument("--window", type=float, help="search window (periods)")
    s.set_defaults(func=cmd_ap)

    s = sub.add_parser("homogenize", help="run an epsilon sweep and write report JSON")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--fields-dir")
    s.set_defaults(func=cmd_homogenize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "ap":
        needs = {"slice": ["nu"], "round": ["L"], "periods": ["delta", "window"]}[args.action]
        if any(getattr(args, k) is None for k in needs):
            print(f"ap {args.action} needs --{' --'.join(needs)}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (DtnHomogError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
