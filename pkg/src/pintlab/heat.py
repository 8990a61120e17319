"""Structured Dirichlet grids and finite-difference heat operators.

Grids store interior unknowns only (homogeneous Dirichlet boundaries are
eliminated), laid out as dense arrays with one axis per dimension and the
x axis last, so C-order raveling gives the lexicographic ordering with x
fastest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Structured grid with `n` cells per dimension on [0, length]^dim."""

    dim: int
    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2, or 3, got {self.dim}")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 2, got {self.n}")

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n - 1,) * self.dim

    @property
    def dof(self) -> int:
        return (self.n - 1) ** self.dim

    def interior_coords(self) -> np.ndarray:
        """Interior point coordinates along one axis."""
        return self.dx * np.arange(1, self.n)

    def coarsen(self) -> "Grid":
        if self.n < 4:
            raise ValueError(f"grid with n={self.n} cannot be coarsened")
        return Grid(self.dim, self.n // 2, self.length)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)


def initial_condition(grid: Grid, k: int) -> np.ndarray:
    """Product of sine modes sin(k pi x / L) sampled at interior points."""
    axes = [np.sin(k * np.pi * grid.interior_coords() / grid.length)
            for _ in range(grid.dim)]
    u = axes[0]
    for a in axes[1:]:
        u = np.multiply.outer(u, a)
    return u


def discrete_symbol(grid: Grid, k: int) -> float:
    """Eigenvalue d(k) of the 1D order-2 Laplacian for sine mode k."""
    if grid.dim != 1:
        raise ValueError("discrete symbol is defined for 1D grids only")
    if not 1 <= k <= grid.n - 1:
        raise ValueError(f"mode number k must be in [1, {grid.n - 1}], got {k}")
    dx = grid.dx
    return (-2.0 + 2.0 * np.cos(k * np.pi * dx / grid.length)) / dx**2


def exact_pde(grid: Grid, k: int, nu: float, t: float) -> np.ndarray:
    """Analytic PDE solution sampled on the grid at time t."""
    rate = grid.dim * nu * (k * np.pi / grid.length) ** 2
    return np.exp(-rate * t) * initial_condition(grid, k)


def exact_ode(grid: Grid, k: int, nu: float, t: float) -> np.ndarray:
    """Exact solution of the semi-discrete system (1D, order-2 stencil).

    The decay rate is nu*d(k) with d(k) < 0; see ``discrete_symbol``.
    """
    return np.exp(nu * discrete_symbol(grid, k) * t) * initial_condition(grid, k)


def _axis_slices(dim: int, axis: int, s: slice) -> tuple:
    idx = [slice(None)] * dim
    idx[axis] = s
    return tuple(idx)


@dataclass(frozen=True)
class HeatOperator:
    """nu times the discrete Laplacian, order-2 or order-4 stencils.

    The order-4 operator falls back to the order-2 stencil at interior
    points adjacent to a boundary, keeping the matrix banded and definite.
    """

    grid: Grid
    nu: float = 1.0
    order: int = 2

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError(f"stencil order must be 2 or 4, got {self.order}")

    def apply(self, u: np.ndarray) -> np.ndarray:
        if u.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {u.shape}")
        dx2 = self.grid.dx ** 2
        dim = self.grid.dim
        out = np.zeros_like(u)
        for axis in range(dim):
            p = [(0, 0)] * dim
            if self.order == 2:
                p[axis] = (1, 1)
                up = np.pad(u, p)
                out += (up[_axis_slices(dim, axis, slice(0, -2))]
                        - 2.0 * u
                        + up[_axis_slices(dim, axis, slice(2, None))]) / dx2
            else:
                p[axis] = (2, 2)
                up = np.pad(u, p)
                d4 = (-up[_axis_slices(dim, axis, slice(0, -4))]
                      + 16.0 * up[_axis_slices(dim, axis, slice(1, -3))]
                      - 30.0 * u
                      + 16.0 * up[_axis_slices(dim, axis, slice(3, -1))]
                      - up[_axis_slices(dim, axis, slice(4, None))]) / (12.0 * dx2)
                # order-2 closure at the first point inside each boundary
                d2 = (up[_axis_slices(dim, axis, slice(1, -3))]
                      - 2.0 * u
                      + up[_axis_slices(dim, axis, slice(3, -1))]) / dx2
                edge = _axis_slices(dim, axis, slice(0, 1))
                d4[edge] = d2[edge]
                edge = _axis_slices(dim, axis, slice(-1, None))
                d4[edge] = d2[edge]
                out += d4
        return self.nu * out

    def diagonal(self) -> np.ndarray:
        """Diagonal of the operator as a full interior array."""
        dx2 = self.grid.dx ** 2
        npts = self.grid.n - 1
        if self.order == 2:
            d1 = np.full(npts, -2.0 / dx2)
        else:
            d1 = np.full(npts, -30.0 / (12.0 * dx2))
            d1[0] = d1[-1] = -2.0 / dx2
        total = np.zeros(self.grid.shape)
        for axis in range(self.grid.dim):
            shape = [1] * self.grid.dim
            shape[axis] = npts
            total = total + d1.reshape(shape)
        return self.nu * total


@dataclass(frozen=True)
class DiagonalOperator:
    """Right-hand side f(y) = diag * y; the scalar model problem is the
    single-entry case."""

    diag: tuple[float, ...]

    @property
    def shape(self) -> tuple[int, ...]:
        return (len(self.diag),)

    def apply(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.diag) * u

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.diag)


def scalar_operator(lam: float) -> DiagonalOperator:
    return DiagonalOperator((lam,))
