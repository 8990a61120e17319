"""Geometric multigrid for the backward-Euler systems (I - sigma*nu*Lap) u = b.

Coarse-level operators are rediscretizations of the fine operator (same
diffusivity, same shift, same stencil order).  The coarsest level is solved
directly.  Smoother sweep order is fixed, so solves are bit-reproducible.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .heat import DiagonalOperator, Grid, HeatOperator
from .transfers import full_weighting, interp_linear


@dataclass(frozen=True)
class MgConfig:
    smoother: str = "jacobi"  # jacobi | gauss-seidel | jor-rb
    omega: float = 2.0 / 3.0
    pre_sweeps: int = 2
    post_sweeps: int = 2
    coarsest_n: int = 4

    def __post_init__(self):
        if self.smoother not in ("jacobi", "gauss-seidel", "jor-rb"):
            raise ValueError(f"unknown smoother {self.smoother!r}")
        if self.pre_sweeps < 0 or self.post_sweeps < 0:
            raise ValueError("sweep counts must be non-negative")
        if self.coarsest_n < 2:
            raise ValueError("coarsest grid needs at least one interior point")


@dataclass(frozen=True)
class FixedCycles:
    cycles: int

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("need at least one V-cycle")


@dataclass(frozen=True)
class ToTolerance:
    tol: float = 1e-12
    stall: float = 0.75
    max_cycles: int = 100

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if not 0.0 < self.stall < 1.0:
            raise ValueError("stall factor must be in (0, 1)")


@dataclass(frozen=True)
class Direct:
    """Exact solve via a cached sparse factorization."""


SolvePolicy = Union[FixedCycles, ToTolerance, Direct]

# The factorization-based triangular solves (LAPACK getrs, SuperLU) are not
# safe to call concurrently in this stack, unlike solve_banded; serialize
# them.  They act on tiny coarsest-level or cached systems, so contention
# under the threaded time-parallel executor is negligible.
_FACTOR_SOLVE_LOCK = threading.Lock()


class MultigridError(RuntimeError):
    """Tolerance solve hit the cycle cap without converging or stalling."""

    def __init__(self, message, residual, cycles):
        super().__init__(message)
        self.residual = residual
        self.cycles = cycles


@lru_cache(maxsize=None)
def _laplacian_1d(n: int, length: float, order: int) -> scipy.sparse.csr_matrix:
    dx2 = (length / n) ** 2
    npts = n - 1
    if order == 2:
        mat = scipy.sparse.diags(
            [1.0, -2.0, 1.0], [-1, 0, 1], shape=(npts, npts)) / dx2
        return mat.tocsr()
    mat = scipy.sparse.lil_matrix((npts, npts))
    for i in range(npts):
        if i == 0 or i == npts - 1:
            mat[i, i] = -2.0 / dx2
            if i - 1 >= 0:
                mat[i, i - 1] = 1.0 / dx2
            if i + 1 < npts:
                mat[i, i + 1] = 1.0 / dx2
        else:
            for off, w in ((-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)):
                j = i + off
                if 0 <= j < npts:
                    mat[i, j] = w / (12.0 * dx2)
    return mat.tocsr()


@lru_cache(maxsize=None)
def _operator_matrix(dim: int, n: int, length: float, nu: float,
                     order: int) -> scipy.sparse.csr_matrix:
    """Sparse matrix of the heat operator in C-order (x fastest)."""
    d1 = _laplacian_1d(n, length, order)
    npts = n - 1
    eye = scipy.sparse.identity(npts, format="csr")
    total = None
    for axis in range(dim):
        factors = [d1 if ax == axis else eye for ax in range(dim)]
        term = factors[0]
        for f in factors[1:]:
            term = scipy.sparse.kron(term, f, format="csr")
        total = term if total is None else total + term
    return (nu * total).tocsr()


def operator_matrix(op: HeatOperator) -> scipy.sparse.csr_matrix:
    g = op.grid
    return _operator_matrix(g.dim, g.n, g.length, op.nu, op.order)


@lru_cache(maxsize=None)
def _shifted_matrix(dim, n, length, nu, order, sigma):
    a = _operator_matrix(dim, n, length, nu, order)
    return (scipy.sparse.identity(a.shape[0], format="csr") - sigma * a).tocsr()


@lru_cache(maxsize=None)
def _shifted_lu(dim, n, length, nu, order, sigma):
    return scipy.sparse.linalg.splu(
        _shifted_matrix(dim, n, length, nu, order, sigma).tocsc())


@lru_cache(maxsize=None)
def _shifted_lower_banded(dim, n, length, nu, order, sigma):
    """Lower-triangular part in LAPACK banded storage, for solve_banded.

    Stateless per solve, so safe under the threaded time-parallel executor.
    """
    lower = scipy.sparse.tril(
        _shifted_matrix(dim, n, length, nu, order, sigma), format="coo")
    n_bands = int(np.max(lower.row - lower.col)) + 1
    size = lower.shape[0]
    ab = np.zeros((n_bands, size))
    for k in range(n_bands):
        d = lower.diagonal(-k)
        ab[k, :d.size] = d
    return ab, n_bands - 1


@lru_cache(maxsize=None)
def _coarsest_lu(dim, n, length, nu, order, sigma):
    dense = _shifted_matrix(dim, n, length, nu, order, sigma).toarray()
    return scipy.linalg.lu_factor(dense)


@lru_cache(maxsize=None)
def _red_mask(shape: tuple[int, ...]) -> np.ndarray:
    """Points with even grid coordinate sum (grid indices start at 1)."""
    total = np.zeros(shape, dtype=int)
    for axis, npts in enumerate(shape):
        s = [1] * len(shape)
        s[axis] = npts
        total = total + np.arange(1, npts + 1).reshape(s)
    return total % 2 == 0


class ShiftedOperator:
    """I - sigma * A for a heat (or diagonal) right-hand-side operator."""

    def __init__(self, base, sigma: float):
        if sigma < 0:
            raise ValueError("shift must be non-negative")
        self.base = base
        self.sigma = sigma
        self._diag = 1.0 - sigma * base.diagonal()

    @property
    def grid(self) -> Grid:
        return self.base.grid

    def apply(self, u: np.ndarray) -> np.ndarray:
        return u - self.sigma * self.base.apply(u)

    def diagonal(self) -> np.ndarray:
        return self._diag

    def _key(self):
        op = self.base
        g = op.grid
        return (g.dim, g.n, g.length, op.nu, op.order, self.sigma)

    def solve_direct(self, b: np.ndarray) -> np.ndarray:
        if isinstance(self.base, DiagonalOperator):
            return b / self._diag
        lu = _shifted_lu(*self._key())
        with _FACTOR_SOLVE_LOCK:
            return lu.solve(b.ravel()).reshape(b.shape)


def smooth(op: ShiftedOperator, u: np.ndarray, b: np.ndarray,
           cfg: MgConfig, count: int) -> np.ndarray:
    if u.shape != b.shape:
        raise ValueError("shape mismatch between iterate and right-hand side")
    diag = op.diagonal()
    if cfg.smoother == "jacobi":
        for _ in range(count):
            u = u + cfg.omega * (b - op.apply(u)) / diag
    elif cfg.smoother == "gauss-seidel":
        ab, n_lower = _shifted_lower_banded(*op._key())
        for _ in range(count):
            r = b - op.apply(u)
            du = scipy.linalg.solve_banded((n_lower, 0), ab, r.ravel())
            u = u + du.reshape(u.shape)
    else:  # jor-rb
        red = _red_mask(u.shape)
        black = ~red
        u = u.copy()
        for _ in range(count):
            r = b - op.apply(u)
            u[red] += cfg.omega * r[red] / diag[red]
            r = b - op.apply(u)
            u[black] += cfg.omega * r[black] / diag[black]
    return u


def v_cycle(op: ShiftedOperator, u: np.ndarray, b: np.ndarray,
            cfg: MgConfig) -> np.ndarray:
    grid = op.grid
    if grid.n <= cfg.coarsest_n:
        lu = _coarsest_lu(*op._key())
        with _FACTOR_SOLVE_LOCK:
            return scipy.linalg.lu_solve(lu, b.ravel()).reshape(b.shape)
    u = smooth(op, u, b, cfg, cfg.pre_sweeps)
    r = b - op.apply(u)
    coarse_grid = grid.coarsen()
    coarse_op = ShiftedOperator(
        HeatOperator(coarse_grid, op.base.nu, op.base.order), op.sigma)
    ec = v_cycle(coarse_op, coarse_grid.zeros(), full_weighting(r), cfg)
    u = u + interp_linear(ec)
    return smooth(op, u, b, cfg, cfg.post_sweeps)


@dataclass
class SolveResult:
    u: np.ndarray
    cycles: int
    status: str  # direct | fixed | converged | stalled


def solve(op: ShiftedOperator, u0: np.ndarray, b: np.ndarray,
          cfg: MgConfig, policy: SolvePolicy) -> SolveResult:
    if isinstance(policy, Direct):
        return SolveResult(op.solve_direct(b), 0, "direct")
    if isinstance(policy, FixedCycles):
        u = u0
        for _ in range(policy.cycles):
            u = v_cycle(op, u, b, cfg)
        return SolveResult(u, policy.cycles, "fixed")
    # ToTolerance: relative residual, with stall detection
    bnorm = np.linalg.norm(b.ravel())
    if bnorm == 0.0:
        return SolveResult(np.zeros_like(b), 0, "converged")
    u = u0
    res = np.linalg.norm((b - op.apply(u)).ravel())
    cycles = 0
    while res > policy.tol * bnorm:
        if cycles >= policy.max_cycles:
            raise MultigridError(
                f"no convergence after {cycles} V-cycles "
                f"(relative residual {res / bnorm:.3e})", res, cycles)
        u = v_cycle(op, u, b, cfg)
        cycles += 1
        new_res = np.linalg.norm((b - op.apply(u)).ravel())
        if new_res > policy.tol * bnorm and new_res >= policy.stall * res:
            return SolveResult(u, cycles, "stalled")
        res = new_res
    return SolveResult(u, cycles, "converged")
