"""Reading and writing fields, kernels, polynomials and run configurations.

Field files are CSV with a one-line JSON grid header::

    # {"r": 1.0, "L": 6.283185307179586, "n_t": 64, "n_n": 33, "d": 1}
    i,k,value
    0,0,0.12345678901234567
    ...

Boundary fields are written as the ``k = 0`` layer.  Configs are plain
``key = value`` text, read with :mod:`configparser` (no section header
needed).
"""

from __future__ import annotations

import configparser
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .almostperiodic import TrigPolynomial
from .grid import BoundaryField, BulkField, StripGrid, make_grid
from .operators import EllipticOperator, make_operator
from .solver import SolveConfig

FMT = "{:.17g}"


# ---------------------------------------------------------------------------
# fields


def _header(grid: StripGrid) -> str:
    meta = {k: grid.metadata()[k] for k in ("r", "L", "n_t", "n_n", "d")}
    return "# " + json.dumps(meta)


def field_to_csv(f: BulkField | BoundaryField) -> str:
    grid = f.grid
    d = grid.boundary_dim
    vals = f.values if isinstance(f, BulkField) else f.values[..., None]
    buf = io.StringIO()
    buf.write(_header(grid) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "k", "value"] if d == 2 else ["i", "k", "value"])
    for idx in np.ndindex(vals.shape):
        w.writerow([*idx, FMT.format(vals[idx])])
    return buf.getvalue()


def field_from_csv(text: str, boundary: bool | None = None) -> BulkField | BoundaryField:
    """Parse a field file; ``boundary=None`` infers the kind from the layers present."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("field file must start with a '# {json}' grid header")
    meta = json.loads(lines[0][1:])
    grid = make_grid(meta["r"], meta["L"], meta["n_t"], meta["n_n"], meta.get("d", 1))
    rows = list(csv.reader(lines[1:]))
    head, body = rows[0], [r for r in rows[1:] if r]
    n_idx = len(head) - 1
    if n_idx != grid.boundary_dim + 1:
        raise ValueError(f"header {head} does not match d={grid.boundary_dim}")
    idx = np.array([[int(x) for x in r[:n_idx]] for r in body], dtype=int)
    vals = np.array([float(r[-1]) for r in body])
    if boundary is None:
        boundary = bool(np.all(idx[:, -1] == 0))
    if boundary:
        # a bulk file read as boundary data contributes its k = 0 layer
        on = idx[:, -1] == 0
        out = np.full(grid.boundary_shape, np.nan)
        out[tuple(idx[on, :-1].T)] = vals[on]
        if np.isnan(out).any():
            raise ValueError("boundary field file is missing nodes")
        return BoundaryField(grid, out)
    out = np.full(grid.shape, np.nan)
    out[tuple(idx.T)] = vals
    if np.isnan(out).any():
        raise ValueError("bulk field file is missing nodes")
    return BulkField(grid, out)


def write_field(path, f) -> None:
    Path(path).write_text(field_to_csv(f))


def read_field(path, boundary: bool | None = None):
    return field_from_csv(Path(path).read_text(), boundary)


def write_kernel(path, K: np.ndarray) -> None:
    """Dense matrix as row-major CSV, 17 significant digits."""
    np.savetxt(path, np.asarray(K), delimiter=",", fmt="%.17g")


def read_kernel(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def read_polynomial(path) -> TrigPolynomial:
    return TrigPolynomial.from_csv(Path(path).read_text())


def write_polynomial(path, g: TrigPolynomial) -> None:
    Path(path).write_text(g.to_csv())


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


# ---------------------------------------------------------------------------
# configs

_SECTION = "run"


@dataclass
class RunConfig:
    """Parsed ``key = value`` configuration with typed accessors."""

    values: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def get(self, key, default=None):
        return self.values.get(key, default)

    def number(self, key, default=None) -> float | None:
        v = self.values.get(key)
        return default if v is None else float(v)

    def integer(self, key, default=None) -> int | None:
        v = self.values.get(key)
        return default if v is None else int(float(v))

    def flag(self, key, default=False) -> bool:
        v = self.values.get(key)
        if v is None:
            return default
        return v.strip().lower() in ("1", "true", "yes", "on")

    def floats(self, key) -> list | None:
        v = self.values.get(key)
        if v is None:
            return None
        return [_parse_float(x) for x in v.replace(";", ",").split(",") if x.strip()]

    def path(self, key) -> Path | None:
        v = self.values.get(key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base_dir / p

    # -- builders --------------------------------------------------------------

    def grid(self) -> StripGrid:
        return make_grid(
            self.number("r", 1.0),
            self.number("L", 2 * np.pi),
            self.integer("n_t", 64),
            self.integer("n_n", 33),
            self.integer("d", 1),
            tangential_order=self.integer("tangential_order", 4),
        )

    def operator(self) -> EllipticOperator:
        name = self.get("operator", "linear")
        dim = self.integer("d", 1) + 1
        return make_operator(
            name,
            self.number("lambda", 1.0),
            self.number("Lambda", 2.0),
            _parse_matrices(self.get("matrices"), name, dim),
            dim,
            self.get("outer", "min"),
        )

    def solve_config(self) -> SolveConfig:
        return SolveConfig(
            residual_tol=self.number("residual_tol", 1e-9),
            max_iters=self.integer("max_iters", 2_000_000),
            method=self.get("method", "newton"),
            max_newton=self.integer("max_newton", 60),
        )


def _parse_float(s: str) -> float:
    s = s.strip()
    if "/" in s:
        num, den = s.split("/")
        return float(num) / float(den)
    return float(s)


def _parse_matrices(text, name, dim):
    """Row-major float lists; ``;`` separates matrices, ``|`` separates Bellman groups."""
    if text is None:
        return None
    text = text.strip()
    if name == "bellman":
        return [
            [[_parse_float(x) for x in m.split(",")] for m in grp.split(";") if m.strip()]
            for grp in text.split("|")
        ]
    mats = [[_parse_float(x) for x in m.split(",")] for m in text.split(";") if m.strip()]
    if len(mats) != 1 or len(mats[0]) != dim * dim:
        raise ValueError(f"linear operator needs one {dim}x{dim} matrix")
    return mats[0]


def parse_config(text: str, base_dir=".") -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    cp.read_string(f"[{_SECTION}]\n" + text)
    values = {}
    for sec in cp.sections():
        values.update(cp[sec])
    return RunConfig(values, Path(base_dir))


def read_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent)
