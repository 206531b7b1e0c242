"""Uniformly elliptic operators ``F`` acting on (discrete) Hessians.

Four kinds are supported: a constant-coefficient linear operator
``Tr(A H)``, the two Pucci extremal operators, and a two-level Bellman family
``outer_g inner_i Tr(A_gi H)`` (``inner`` is the opposite of ``outer``).
All of them are positively 1-homogeneous, so each can be written as
``F(H) = Tr(A(H) H)`` with an admissible coefficient matrix ``A(H)``; that
matrix is what :func:`policy` returns and what the Newton solver freezes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BoundaryNode, NonSymmetricInput
from .grid import BulkField, StripGrid

KINDS = ("linear", "pucci-", "pucci+", "bellman")
_EIG_SLACK = 1e-12


@dataclass(frozen=True)
class EllipticityConstants:
    lam: float
    Lam: float

    def __post_init__(self):
        if not (0 < self.lam <= self.Lam):
            raise ValueError(f"need 0 < lambda <= Lambda, got {self.lam}, {self.Lam}")


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """Specification of ``F``.

    ``matrices`` holds ``[[A]]`` for a linear operator and the Bellman groups
    for ``kind='bellman'``; it is empty for the Pucci operators.
    """

    kind: str
    constants: EllipticityConstants
    matrices: tuple = field(default=())
    outer: str = "min"

    @property
    def lam(self) -> float:
        return self.constants.lam

    @property
    def Lam(self) -> float:
        return self.constants.Lam

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def __repr__(self):
        extra = ""
        if self.kind == "bellman":
            extra = f", groups={[len(g) for g in self.matrices]}, outer={self.outer!r}"
        return f"EllipticOperator({self.kind!r}, lam={self.lam}, Lam={self.Lam}{extra})"


def _check_admissible(A: np.ndarray, constants: EllipticityConstants) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"coefficient matrix must be square, got shape {A.shape}")
    if not np.allclose(A, A.T, atol=1e-14, rtol=0):
        raise NonSymmetricInput("coefficient matrix is not symmetric")
    eig = np.linalg.eigvalsh(A)
    tol = _EIG_SLACK * max(1.0, constants.Lam)
    if eig.min() < constants.lam - tol or eig.max() > constants.Lam + tol:
        raise ValueError(
            f"eigenvalues {eig} of coefficient matrix outside [{constants.lam}, {constants.Lam}]"
        )
    A = 0.5 * (A + A.T)
    A.flags.writeable = False
    return A


def linear(A, lam: float | None = None, Lam: float | None = None) -> EllipticOperator:
    """``F(H) = Tr(A H)``.  Ellipticity constants default to the extreme eigenvalues of ``A``."""
    A = np.asarray(A, dtype=float)
    eig = np.linalg.eigvalsh(0.5 * (A + A.T))
    constants = EllipticityConstants(eig.min() if lam is None else lam, eig.max() if Lam is None else Lam)
    return EllipticOperator("linear", constants, ((_check_admissible(A, constants),),))


def laplacian(dim: int = 2) -> EllipticOperator:
    return linear(np.eye(dim), 1.0, 1.0)


def pucci_minus(lam: float = 1.0, Lam: float = 2.0) -> EllipticOperator:
    return EllipticOperator("pucci-", EllipticityConstants(lam, Lam))


def pucci_plus(lam: float = 1.0, Lam: float = 2.0) -> EllipticOperator:
    return EllipticOperator("pucci+", EllipticityConstants(lam, Lam))


def bellman(groups, lam: float, Lam: float, outer: str = "min") -> EllipticOperator:
    """``outer`` over groups of ``inner`` over ``Tr(A H)``, e.g. min of maxes."""
    if outer not in ("min", "max"):
        raise ValueError("outer must be 'min' or 'max'")
    constants = EllipticityConstants(lam, Lam)
    groups = tuple(tuple(_check_admissible(A, constants) for A in g) for g in groups)
    if not groups or any(len(g) == 0 for g in groups):
        raise ValueError("Bellman family needs at least one non-empty group")
    shapes = {A.shape for g in groups for A in g}
    if len(shapes) != 1:
        raise ValueError("all Bellman matrices must share one shape")
    return EllipticOperator("bellman", constants, groups, outer)


def random_admissible_matrix(rng: np.random.Generator, dim: int, lam: float, Lam: float) -> np.ndarray:
    """Symmetric matrix with spectrum drawn uniformly from ``[lam, Lam]``."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q @ np.diag(rng.uniform(lam, Lam, dim)) @ q.T


def random_bellman(rng: np.random.Generator, dim: int, lam: float = 1.0, Lam: float = 2.0,
                   n_groups: int = 2, group_size: int = 2) -> EllipticOperator:
    groups = [[random_admissible_matrix(rng, dim, lam, Lam) for _ in range(group_size)]
              for _ in range(n_groups)]
    return bellman(groups, lam, Lam, outer="min")


def make_operator(name: str, lam: float = 1.0, Lam: float = 2.0, matrices=None, dim: int = 2,
                  outer: str = "min") -> EllipticOperator:
    """Build an operator from config-style arguments.

    ``name`` is one of ``linear``, ``pucci-``, ``pucci+``, ``bellman``.  For
    ``linear`` without matrices the Laplacian scaled by ``lam`` is used; for
    ``bellman`` ``matrices`` is a list of groups.
    """
    if name == "linear":
        A = np.eye(dim) * lam if matrices is None else np.asarray(matrices, dtype=float).reshape(dim, dim)
        return linear(A, lam, Lam)
    if name == "pucci-":
        return pucci_minus(lam, Lam)
    if name == "pucci+":
        return pucci_plus(lam, Lam)
    if name == "bellman":
        if matrices is None:
            raise ValueError("bellman operator requires matrices")
        groups = [[np.asarray(A, dtype=float).reshape(dim, dim) for A in g] for g in matrices]
        return bellman(groups, lam, Lam, outer)
    raise ValueError(f"unknown operator {name!r}; expected one of {KINDS}")


# ---------------------------------------------------------------------------
# evaluation on matrices


def _as_symmetric(H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim < 2 or H.shape[-1] != H.shape[-2]:
        raise NonSymmetricInput(f"expected square matrices, got shape {H.shape}")
    scale = 1.0 + np.max(np.abs(H), initial=0.0)
    if np.max(np.abs(H - np.swapaxes(H, -1, -2)), initial=0.0) > 1e-12 * scale:
        raise NonSymmetricInput("Hessian input is not symmetric")
    return H


def symmetric_eigenvalues(H: np.ndarray) -> np.ndarray:
    """Eigenvalues of stacked symmetric matrices; closed form for 2x2."""
    if H.shape[-1] == 2:
        a, b, c = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
        mid = 0.5 * (a + c)
        rad = np.hypot(0.5 * (a - c), b)
        return np.stack([mid - rad, mid + rad], axis=-1)
    return np.linalg.eigvalsh(H)


def pucci(H, lam: float, Lam: float, sign: int) -> np.ndarray:
    e = symmetric_eigenvalues(H)
    pos = np.where(e >= 0, e, 0.0).sum(axis=-1)
    neg = np.where(e < 0, e, 0.0).sum(axis=-1)
    if sign > 0:
        return Lam * pos + lam * neg
    return lam * pos + Lam * neg


def _traces(op: EllipticOperator, H: np.ndarray) -> np.ndarray:
    """``Tr(A_gi H)`` for all Bellman members, shape ``H.shape[:-2] + (groups, members)``.

    Ragged groups are padded with the group's last member, which does not
    change the inner extremum.
    """
    width = max(len(g) for g in op.matrices)
    mats = np.array([[g[min(i, len(g) - 1)] for i in range(width)] for g in op.matrices])
    return np.einsum("gipq,...pq->...gi", mats, H)


def evaluate_F(op: EllipticOperator, H) -> np.ndarray | float:
    """Evaluate ``F`` on one symmetric matrix or a stack of them."""
    H = _as_symmetric(H)
    if op.kind == "linear":
        out = np.einsum("pq,...pq->...", op.matrices[0][0], H)
    elif op.kind == "pucci+":
        out = pucci(H, op.lam, op.Lam, +1)
    elif op.kind == "pucci-":
        out = pucci(H, op.lam, op.Lam, -1)
    elif op.kind == "bellman":
        T = _traces(op, H)
        if op.outer == "min":
            out = T.max(axis=-1).min(axis=-1)
        else:
            out = T.min(axis=-1).max(axis=-1)
    else:
        raise ValueError(f"unknown operator kind {op.kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def policy(op: EllipticOperator, H) -> np.ndarray:
    """Admissible coefficient matrices ``A(H)`` with ``F(H) = Tr(A(H) H)``.

    For the Pucci operators this is the extremal matrix built from the
    eigenprojections of ``H``; for Bellman it is the active member.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[-1]
    if op.kind == "linear":
        return np.broadcast_to(op.matrices[0][0], H.shape).copy()
    if op.kind in ("pucci+", "pucci-"):
        e, Q = np.linalg.eigh(H)
        hi, lo = (op.Lam, op.lam) if op.kind == "pucci+" else (op.lam, op.Lam)
        a = np.where(e >= 0, hi, lo)
        return np.einsum("...pk,...k,...qk->...pq", Q, a, Q)
    if op.kind == "bellman":
        T = _traces(op, H)
        if op.outer == "min":
            inner = T.argmax(axis=-1)
            inner_val = np.take_along_axis(T, inner[..., None], axis=-1)[..., 0]
            grp = inner_val.argmin(axis=-1)
        else:
            inner = T.argmin(axis=-1)
            inner_val = np.take_along_axis(T, inner[..., None], axis=-1)[..., 0]
            grp = inner_val.argmax(axis=-1)
        mem = np.take_along_axis(inner, grp[..., None], axis=-1)[..., 0]
        width = max(len(g) for g in op.matrices)
        mats = np.array([[g[min(i, len(g) - 1)] for i in range(width)] for g in op.matrices])
        return mats[grp, mem].reshape(H.shape[:-2] + (n, n))
    raise ValueError(f"unknown operator kind {op.kind!r}")


def ellipticity_sandwich_check(op: EllipticOperator, H1, H2) -> bool:
    """Whether ``M-(H1-H2) <= F(H1) - F(H2) <= M+(H1-H2)`` up to a relative tolerance."""
    H1 = _as_symmetric(H1)
    H2 = _as_symmetric(H2)
    tol = 1e-10 * (np.linalg.norm(H1) + np.linalg.norm(H2) + 1.0)
    diff = evaluate_F(op, H1) - evaluate_F(op, H2)
    D = H1 - H2
    lower = pucci(D, op.lam, op.Lam, -1)
    upper = pucci(D, op.lam, op.Lam, +1)
    return bool(lower - tol <= diff <= upper + tol)


# ---------------------------------------------------------------------------
# discrete Hessian

_TANGENTIAL_D2 = {
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    4: ((-2, -1.0 / 12), (-1, 16.0 / 12), (0, -30.0 / 12), (1, 16.0 / 12), (2, -1.0 / 12)),
}
_NORMAL_D2 = ((-1, 1.0), (0, -2.0), (1, 1.0))
_CROSS = (((1, 1), 0.25), ((1, -1), -0.25), ((-1, 1), -0.25), ((-1, -1), 0.25))


def hessian_stencils(grid: StripGrid) -> dict:
    """Stencils for each upper-triangular Hessian entry.

    Returns ``{(p, q): [(offset, weight), ...]}`` where ``offset`` is an
    integer vector over the ``d + 1`` grid axes (normal axis last) and the
    weights already include the spacing factors.
    """
    d = grid.boundary_dim
    dim = d + 1
    spacing = [grid.h_t] * d + [grid.h_n]
    out = {}
    for p in range(dim):
        table = _NORMAL_D2 if p == d else _TANGENTIAL_D2[grid.tangential_order]
        entries = []
        for o, w in table:
            off = [0] * dim
            off[p] = o
            entries.append((tuple(off), w / spacing[p] ** 2))
        out[(p, p)] = entries
        for q in range(p + 1, dim):
            entries = []
            for (op_, oq), w in _CROSS:
                off = [0] * dim
                off[p], off[q] = op_, oq
                entries.append((tuple(off), w / (spacing[p] * spacing[q])))
            out[(p, q)] = entries
    return out


def interior_shift(arr: np.ndarray, offset) -> np.ndarray:
    """Values of ``arr`` at ``node + offset`` for every interior node.

    Tangential axes wrap periodically; the normal axis (last) is sliced to the
    interior layers ``1 .. n_n - 2``.
    """
    *tang, on = offset
    if any(tang):
        arr = np.roll(arr, tuple(-t for t in tang), axis=tuple(range(len(tang))))
    n = arr.shape[-1]
    return arr[..., 1 + on : n - 1 + on]


def discrete_hessians(u: BulkField) -> np.ndarray:
    """Discrete Hessian at every interior node, shape ``interior + (d+1, d+1)``."""
    grid = u.grid
    dim = grid.boundary_dim + 1
    interior = grid.shape[:-1] + (grid.n_normal - 2,)
    H = np.zeros(interior + (dim, dim))
    for (p, q), entries in hessian_stencils(grid).items():
        acc = np.zeros(interior)
        for off, w in entries:
            acc += w * interior_shift(u.values, off)
        H[..., p, q] = acc
        H[..., q, p] = acc
    return H


def discrete_hessian(u: BulkField, node) -> np.ndarray:
    """Discrete Hessian at a single interior ``node`` (tangential indices wrap)."""
    grid = u.grid
    node = tuple(int(i) for i in node)
    if len(node) != grid.boundary_dim + 1:
        raise ValueError(f"node needs {grid.boundary_dim + 1} indices")
    k = node[-1]
    if not 0 < k < grid.n_normal - 1:
        raise BoundaryNode(f"normal index {k} is on the boundary")
    dim = grid.boundary_dim + 1
    H = np.zeros((dim, dim))
    n_t = grid.n_tangential
    for (p, q), entries in hessian_stencils(grid).items():
        acc = 0.0
        for off, w in entries:
            idx = tuple((node[a] + off[a]) % n_t for a in range(dim - 1)) + (k + off[-1],)
            acc += w * u.values[idx]
        H[p, q] = H[q, p] = acc
    return H


def apply_operator(op: EllipticOperator, u: BulkField) -> np.ndarray:
    """``F(D^2 u)`` on the interior nodes."""
    return evaluate_F(op, discrete_hessians(u))
