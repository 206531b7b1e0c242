"""Truncated strip grids and the grid functions that live on them.

The strip ``{0 < X.nu < r}`` is discretized node-centred, with both boundary
layers included.  The boundary hyperplane is truncated to a torus of side
``L`` in each of its ``d`` tangential directions.  Arrays are laid out with
the tangential axes first and the normal axis last, so a bulk array has shape
``(n_t,) * d + (n_n,)`` and normal index ``0`` is the Neumann/Dirichlet
boundary while ``n_n - 1`` is the far boundary where the solution vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NonPositiveDimension, TooCoarse

MIN_TANGENTIAL = 8
MIN_NORMAL = 4


@dataclass(frozen=True)
class StripGrid:
    """Discretization of the strip of height ``depth_r``.

    Attributes
    ----------
    depth_r : float
        Strip height.
    tangential_period_L : float
        Period of the tangential torus.
    n_tangential : int
        Nodes per tangential direction (index ``n_tangential`` wraps to 0).
    n_normal : int
        Nodes across the strip, boundary layers included.
    boundary_dim : int
        Dimension ``d`` of the boundary hyperplane (1 or 2).
    tangential_order : int
        Accuracy order (2 or 4) of the centred tangential second difference.
    """

    depth_r: float
    tangential_period_L: float
    n_tangential: int
    n_normal: int
    boundary_dim: int = 1
    tangential_order: int = 4

    @property
    def h_t(self) -> float:
        return self.tangential_period_L / self.n_tangential

    @property
    def h_n(self) -> float:
        return self.depth_r / (self.n_normal - 1)

    @property
    def h(self) -> float:
        """Coarsest spacing; the scale used in ``C * h**2`` tolerances."""
        return max(self.h_t, self.h_n)

    @property
    def d(self) -> int:
        return self.boundary_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_tangential,) * self.boundary_dim + (self.n_normal,)

    @property
    def boundary_shape(self) -> tuple[int, ...]:
        return (self.n_tangential,) * self.boundary_dim

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def tangential_coords(self) -> np.ndarray:
        return np.arange(self.n_tangential) * self.h_t

    def normal_coords(self) -> np.ndarray:
        return np.arange(self.n_normal) * self.h_n

    def boundary_points(self) -> np.ndarray:
        """Boundary node coordinates, shape ``boundary_shape + (d,)``."""
        axes = [self.tangential_coords()] * self.boundary_dim
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def bulk_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x, y)``: tangential coordinates ``shape + (d,)`` and normal
        coordinate ``shape``."""
        axes = [self.tangential_coords()] * self.boundary_dim + [self.normal_coords()]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh[:-1], axis=-1), mesh[-1]

    def with_depth(self, r: float, n_normal: int | None = None) -> StripGrid:
        """Same tangential torus, new strip height.

        With ``n_normal=None`` the normal spacing is kept as close as possible
        to the current one.
        """
        if n_normal is None:
            n_normal = max(MIN_NORMAL, int(round(r / self.h_n)) + 1)
        return make_grid(
            r, self.tangential_period_L, self.n_tangential, n_normal, self.boundary_dim,
            tangential_order=self.tangential_order,
        )

    def scaled(self, factor: float) -> StripGrid:
        """Grid with every length multiplied by ``factor`` and the same node counts."""
        return make_grid(
            self.depth_r * factor,
            self.tangential_period_L * factor,
            self.n_tangential,
            self.n_normal,
            self.boundary_dim,
            tangential_order=self.tangential_order,
        )

    def metadata(self) -> dict:
        return {
            "r": self.depth_r,
            "L": self.tangential_period_L,
            "n_t": self.n_tangential,
            "n_n": self.n_normal,
            "d": self.boundary_dim,
            "tangential_order": self.tangential_order,
        }


def make_grid(
    r: float, L: float, n_t: int, n_n: int, d: int = 1, *, tangential_order: int = 4
) -> StripGrid:
    """Build a :class:`StripGrid`, validating the inputs."""
    if not (r > 0 and L > 0):
        raise NonPositiveDimension(f"strip height and period must be positive, got r={r}, L={L}")
    if d not in (1, 2):
        raise ValueError(f"boundary_dim must be 1 or 2, got {d}")
    if n_t < MIN_TANGENTIAL or n_n < MIN_NORMAL:
        raise TooCoarse(
            f"need n_t >= {MIN_TANGENTIAL} and n_n >= {MIN_NORMAL}, got n_t={n_t}, n_n={n_n}"
        )
    if tangential_order not in (2, 4):
        raise ValueError(f"tangential_order must be 2 or 4, got {tangential_order}")
    return StripGrid(float(r), float(L), int(n_t), int(n_n), int(d), int(tangential_order))


class _Field:
    _expected_shape: str

    def __init__(self, grid: StripGrid, values):
        values = np.array(values, dtype=float)
        shape = getattr(grid, self._expected_shape)
        if values.ndim == 0:
            values = np.full(shape, float(values))
        if values.shape != shape:
            raise ValueError(f"expected values of shape {shape}, got {values.shape}")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    def _coerce(self, other):
        if isinstance(other, _Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return type(self)(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return type(self)(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return type(self)(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return type(self)(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, -self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def shifted(self, k) -> "_Field":
        """Tangential translation by ``k`` cells: result[i] = self[i + k]."""
        k = np.broadcast_to(np.atleast_1d(k), (self.grid.boundary_dim,))
        axes = tuple(range(self.grid.boundary_dim))
        return type(self)(self.grid, np.roll(self.values, tuple(-int(s) for s in k), axis=axes))

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.values.shape}, sup={self.sup_norm():.3g})"


class BulkField(_Field):
    """Grid function on the closed strip."""

    _expected_shape = "shape"


class BoundaryField(_Field):
    """Grid function on the boundary torus."""

    _expected_shape = "boundary_shape"

    def mean(self) -> float:
        return float(self.values.mean())

    def oscillation(self) -> float:
        return float(self.values.max() - self.values.min())


def boundary_from_function(grid: StripGrid, func) -> BoundaryField:
    """Sample ``func`` on the boundary nodes.

    ``func`` receives tangential coordinates of shape ``boundary_shape + (d,)``
    when ``d == 2`` and of shape ``(n_t,)`` when ``d == 1``.
    """
    pts = grid.boundary_points()
    if grid.boundary_dim == 1:
        pts = pts[..., 0]
    return BoundaryField(grid, func(pts))


def bulk_from_function(grid: StripGrid, func) -> BulkField:
    """Sample ``func(x, y)`` on all nodes (``x`` as in :func:`boundary_from_function`)."""
    x, y = grid.bulk_points()
    if grid.boundary_dim == 1:
        x = x[..., 0]
    return BulkField(grid, func(x, y))


def restrict_to_boundary(u: BulkField) -> BoundaryField:
    return BoundaryField(u.grid, u.values[..., 0])


def normal_derivative_at_boundary(u: BulkField) -> BoundaryField:
    """Second-order one-sided derivative along the interior normal at normal index 0."""
    grid = u.grid
    if grid.n_normal < 3:
        raise TooCoarse("one-sided normal derivative needs three normal layers")
    v = u.values
    return BoundaryField(grid, (-3.0 * v[..., 0] + 4.0 * v[..., 1] - v[..., 2]) / (2.0 * grid.h_n))
