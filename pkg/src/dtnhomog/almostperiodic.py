"""Trigonometric polynomials as almost-periodic boundary data.

A :class:`TrigPolynomial` is ``g(x) = sum_m a_m cos(omega_m . x + theta_m)``
with arbitrary real frequency vectors.  Restricting a ``Z^{d+1}``-periodic
function to a hyperplane with an irrational normal gives incommensurate
frequencies; rounding the frequencies onto the lattice ``2 pi Z^d / L`` makes
the data exactly periodic on the computational torus at a reported cost.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import NoneFoundInWindow, NonUnitNormal


@dataclass(frozen=True, eq=False)
class TrigPolynomial:
    amplitudes: np.ndarray
    frequencies: np.ndarray  # shape (m, d)
    phases: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        w = np.asarray(self.frequencies, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        th = np.atleast_1d(np.asarray(self.phases, dtype=float))
        if w.ndim != 2 or not (len(a) == len(w) == len(th)):
            raise ValueError("amplitudes, frequencies and phases must have equal length")
        for arr in (a, w, th):
            arr.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", th)

    @classmethod
    def from_terms(cls, terms, dim: int = 1) -> "TrigPolynomial":
        """From ``[(amplitude, frequency, phase), ...]``; frequency is a scalar or a length-``dim`` vector."""
        terms = list(terms)
        if not terms:
            return cls(np.zeros(0), np.zeros((0, dim)), np.zeros(0))
        a = [t[0] for t in terms]
        w = [np.atleast_1d(np.asarray(t[1], dtype=float)) for t in terms]
        th = [t[2] if len(t) > 2 else 0.0 for t in terms]
        return cls(np.array(a), np.array(w), np.array(th))

    @classmethod
    def zero(cls, dim: int = 1) -> "TrigPolynomial":
        return cls.from_terms([], dim)

    @property
    def dim(self) -> int:
        return self.frequencies.shape[1]

    def __len__(self) -> int:
        return len(self.amplitudes)

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x``: any shape for ``dim == 1``, else ``(..., dim)``."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            x = x[..., None]
        arg = x @ self.frequencies.T + self.phases
        return np.cos(arg) @ self.amplitudes

    def sup_bound(self) -> float:
        """``sum |a_m|``, an upper bound for ``sup |g|``."""
        return float(np.abs(self.amplitudes).sum())

    def lipschitz_bound(self) -> float:
        return float((np.abs(self.amplitudes) * np.linalg.norm(self.frequencies, axis=1)).sum())

    def max_frequency(self) -> float:
        return float(np.linalg.norm(self.frequencies, axis=1).max(initial=0.0))

    def mean(self) -> float:
        """Bohr mean: the sum of the zero-frequency terms."""
        zero = np.all(self.frequencies == 0, axis=1)
        return float((self.amplitudes[zero] * np.cos(self.phases[zero])).sum())

    def scaled(self, factor: float) -> "TrigPolynomial":
        """``x -> g(factor * x)``."""
        return TrigPolynomial(self.amplitudes, self.frequencies * factor, self.phases)

    def shifted(self, tau) -> "TrigPolynomial":
        """``x -> g(x + tau)``."""
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (self.dim,))
        return TrigPolynomial(self.amplitudes, self.frequencies, self.phases + self.frequencies @ tau)

    def plus_constant(self, c: float) -> "TrigPolynomial":
        return TrigPolynomial(
            np.append(self.amplitudes, c),
            np.vstack([self.frequencies, np.zeros((1, self.dim))]),
            np.append(self.phases, 0.0),
        )

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return TrigPolynomial(
            np.concatenate([self.amplitudes, other.amplitudes]),
            np.vstack([self.frequencies, other.frequencies]),
            np.concatenate([self.phases, other.phases]),
        )

    def shift_defect_bound(self, tau) -> np.ndarray:
        """``sum |a_m| |2 sin(omega_m . tau / 2)|`` for each shift in ``tau``.

        Upper bound for ``sup_x |g(x + tau) - g(x)|``, attained when the
        frequencies are rationally independent.  ``tau`` is an array of
        scalars when ``dim == 1``, else of shape ``(..., dim)``.
        """
        tau = np.asarray(tau, dtype=float)
        if self.dim == 1:
            tau = tau[..., None]
        return np.abs(2.0 * np.sin(0.5 * (tau @ self.frequencies.T))) @ np.abs(self.amplitudes)

    # -- serialization --------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["amplitude"] + [f"omega_{i + 1}" for i in range(self.dim)] + ["phase"])
        for a, om, th in zip(self.amplitudes, self.frequencies, self.phases):
            w.writerow([f"{a:.17g}"] + [f"{x:.17g}" for x in om] + [f"{th:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrigPolynomial":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]
        if not rows:
            return cls.zero()
        data = np.array([[float(x) for x in r] for r in rows])
        if data.shape[1] not in (3, 4):
            raise ValueError("polynomial rows must be amplitude,omega_1[,omega_2],phase")
        return cls(data[:, 0], data[:, 1:-1], data[:, -1])

    def __repr__(self):
        return f"TrigPolynomial(terms={len(self)}, dim={self.dim}, sup<={self.sup_bound():.3g})"


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def two_frequency_datum(base_period: float = 2 * math.pi) -> TrigPolynomial:
    """``cos(2 pi x / P) + cos(2 sqrt(2) pi x / P)``: the minimal incommensurate pair."""
    k = 2 * math.pi / base_period
    return TrigPolynomial.from_terms([(1.0, k, 0.0), (1.0, math.sqrt(2) * k, 0.0)])


# ---------------------------------------------------------------------------


def tangential_frame(nu) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to ``nu``, as columns.

    Built by Gram-Schmidt over the standard basis, dropping the vector most
    aligned with ``nu``, so axis-aligned normals give the remaining axes.
    """
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-12:
        raise NonUnitNormal(f"normal must have unit length, got |nu| = {np.linalg.norm(nu)}")
    n = nu.size
    drop = int(np.argmax(np.abs(nu)))
    basis = []
    for i in range(n):
        if i == drop:
            continue
        v = np.eye(n)[i] - nu[i] * nu
        for b in basis:
            v = v - (v @ b) * b
        basis.append(v / np.linalg.norm(v))
    return np.array(basis).T


def periodic_trig(amplitudes, integer_vectors, phases=None) -> TrigPolynomial:
    """``Z^{d+1}``-periodic polynomial ``sum a cos(2 pi n . X + theta)`` from integer vectors ``n``."""
    n = np.asarray(integer_vectors)
    if not np.issubdtype(n.dtype, np.integer) and not np.allclose(n, np.round(n)):
        raise ValueError("frequency vectors must be integers")
    a = np.atleast_1d(np.asarray(amplitudes, dtype=float))
    phases = np.zeros(len(a)) if phases is None else phases
    return TrigPolynomial(a, 2 * np.pi * np.asarray(n, dtype=float).reshape(len(a), -1), phases)


def slice_periodic(G: TrigPolynomial, nu) -> TrigPolynomial:
    """Restrict an ambient polynomial to the hyperplane through 0 orthogonal to ``nu``.

    The hyperplane is parametrized by :func:`tangential_frame`, so the
    boundary frequencies are the frame projections of the ambient ones.
    """
    nu = np.asarray(nu, dtype=float)
    if G.dim != nu.size:
        raise ValueError(f"G has dimension {G.dim} but nu has {nu.size} components")
    E = tangential_frame(nu)
    return TrigPolynomial(G.amplitudes, G.frequencies @ E, G.phases)


def round_to_torus(g: TrigPolynomial, L: float) -> tuple[TrigPolynomial, float]:
    """Snap each frequency to the nearest point of ``(2 pi / L) Z^d``.

    Returns the exactly ``L``-periodic polynomial and the drift bound
    ``sum |a_m| |delta omega_m| L / 2``.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    step = 2 * np.pi / L
    snapped = np.round(g.frequencies / step) * step
    drift = np.linalg.norm(snapped - g.frequencies, axis=1) if len(g) else np.zeros(0)
    err = float((np.abs(g.amplitudes) * drift).sum() * L / 2)
    return TrigPolynomial(g.amplitudes, snapped, g.phases), err


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlmostPeriodRecord:
    delta: float
    tau: np.ndarray
    defect: float
    search_window: float


class AlmostPeriods(list):
    """List of :class:`AlmostPeriodRecord` with the relative-density outcome attached."""

    def __init__(self, records, window: float, sparse: bool, empty_pieces=()):
        super().__init__(records)
        self.window = window
        self.sparse = sparse
        self.empty_pieces = tuple(empty_pieces)

    def taus(self) -> np.ndarray:
        return np.array([rec.tau for rec in self])


def find_almost_periods(g: TrigPolynomial, delta: float, window: float, step: float | None = None,
                        pieces: int = 4, max_points: int = 4_000_000) -> AlmostPeriods:
    """All lattice shifts ``tau`` in ``[0, window]^d`` whose defect bound is below ``delta``.

    ``step`` defaults to ``delta / (4 * lipschitz_bound)`` so no sub-level
    interval of the defect is skipped; pass a grid-aligned step to get shifts
    that are whole numbers of cells.  The window is cut into ``pieces``
    subintervals per axis and every piece except the one at the origin must
    contain a hit, otherwise the result is flagged ``sparse``.

    Raises :class:`NoneFoundInWindow` when the only hits are the trivial
    cluster around ``tau = 0``.
    """
    if not (delta > 0 and window > 0):
        raise ValueError("delta and window must be positive")
    d = g.dim
    if step is None:
        lip = g.lipschitz_bound()
        step = window / 1000 if lip == 0 else delta / (4.0 * lip)
    n = int(math.floor(window / step + 1e-9)) + 1
    if n**d > max_points:
        raise ValueError(f"scan of {n}^{d} points exceeds max_points={max_points}; increase step")
    axis = np.arange(n) * step
    if d == 1:
        taus = axis[:, None]
    else:
        taus = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    defects = g.shift_defect_bound(taus[:, 0] if d == 1 else taus)
    hit = defects < delta
    records = [AlmostPeriodRecord(delta, t.copy(), float(dv), window) for t, dv in zip(taus[hit], defects[hit])]

    # the trivial cluster: hits connected to the origin along the lattice (1D run or 2D flood)
    if d == 1:
        run = np.argmin(hit) if not hit.all() else n
        nontrivial = hit.copy()
        nontrivial[:run] = False
    else:
        from scipy import ndimage

        labels, _ = ndimage.label(hit.reshape((n,) * d))
        origin = labels[(0,) * d]
        nontrivial = (labels.ravel() != origin) & hit
    if not nontrivial.any():
        raise NoneFoundInWindow(
            f"no delta-almost period beyond the origin in [0, {window}]^{d} for delta={delta}"
        )

    piece = window / pieces
    cell = np.minimum((taus / piece).astype(int), pieces - 1)
    empty = []
    for idx in np.ndindex(*([pieces] * d)):
        if all(i == 0 for i in idx):
            continue
        inside = np.all(cell == np.array(idx), axis=1)
        if not hit[inside].any():
            empty.append(idx)
    sparse = bool(empty)
    if sparse:
        warnings.warn(
            f"almost periods are not relatively dense at window={window}: empty pieces {empty}",
            stacklevel=2,
        )
    return AlmostPeriods(records, window, sparse, empty)
