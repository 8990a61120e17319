"""Multi-level SDC: level hierarchy, FAS corrections, and the V-shaped
iteration over levels.

Level transfers use pointwise node selection in time and, in space,
either full-weighting (the default, which filters the high-wavenumber
content that the fine operator would otherwise amplify into the FAS
correction) or pointwise injection, on the way down; the way up combines
Lagrange time interpolation with linear or cubic spatial interpolation.
FAS corrections accumulate through the hierarchy so that every coarse
equation stays consistent with the finest level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .heat import HeatOperator
from .multigrid import MgConfig, SolvePolicy
from .quadrature import (QuadratureTable, correction_interpolation,
                         time_restriction)
from .sdc import NodeStates, residual, sdc_sweep
from .transfers import full_weighting, inject, interp_space


@dataclass(frozen=True)
class Level:
    operator: HeatOperator
    table: QuadratureTable
    mg_cfg: MgConfig
    policy: SolvePolicy
    space_interp_order: int = 2
    space_restrict: str = "full-weighting"

    def __post_init__(self):
        if self.space_interp_order not in (2, 4):
            raise ValueError("space_interp_order must be 2 or 4")
        if self.space_restrict not in ("full-weighting", "inject"):
            raise ValueError(
                "space_restrict must be 'full-weighting' or 'inject'")

    @property
    def grid(self):
        return self.operator.grid


def check_hierarchy(levels: list[Level]) -> None:
    """Validate fine-to-coarse ordering constraints between adjacent levels."""
    if not levels:
        raise ValueError("need at least one level")
    for fine, coarse in zip(levels, levels[1:]):
        if coarse.grid.n not in (fine.grid.n, fine.grid.n // 2):
            raise ValueError(
                f"coarse grid n={coarse.grid.n} must equal fine n or half of "
                f"fine n={fine.grid.n}")
        if coarse.grid.dim != fine.grid.dim or coarse.grid.length != fine.grid.length:
            raise ValueError("levels must share dimension and domain size")
        if coarse.table.m > fine.table.m:
            raise ValueError("coarse level may not have more nodes than fine")
        if coarse.operator.order > fine.operator.order:
            raise ValueError("coarse stencil order may not exceed fine")
        time_restriction(fine.table.nodes, coarse.table.nodes)  # nesting


def restrict_space(u: np.ndarray, fine: Level, coarse: Level) -> np.ndarray:
    if coarse.grid.n == fine.grid.n:
        return u.copy()
    if fine.space_restrict == "inject":
        return inject(u)
    return full_weighting(u)


def _space_interp(u: np.ndarray, fine: Level, coarse: Level) -> np.ndarray:
    if coarse.grid.n == fine.grid.n:
        return u
    return interp_space(u, fine.space_interp_order)


def _time_indices(fine: Level, coarse: Level) -> list[int]:
    r = time_restriction(fine.table.nodes, coarse.table.nodes)
    return [int(np.argmax(row)) for row in r]


def restrict_state(fine_states: NodeStates, fine: Level,
                   coarse: Level) -> NodeStates:
    """Node selection in time, spatial restriction per the fine level's
    policy; the coarse f-cache is recomputed."""
    idx = _time_indices(fine, coarse)
    y = np.stack([restrict_space(fine_states.y[i], fine, coarse) for i in idx])
    states = NodeStates(coarse.table, y, np.empty_like(y))
    states.refresh(coarse.operator)
    return states


def compute_fas(fine_states: NodeStates, coarse_states: NodeStates,
                fine: Level, coarse: Level, dt: float,
                fine_tau: np.ndarray | None = None) -> np.ndarray:
    """FAS correction: restricted fine node integrals minus coarse node
    integrals of the restricted state, plus any correction already present
    on the fine level."""
    fine_int = dt * np.tensordot(fine.table.q, fine_states.f, axes=(1, 0))
    if fine_tau is not None:
        fine_int = fine_int + fine_tau
    idx = _time_indices(fine, coarse)
    restricted_int = np.stack(
        [restrict_space(fine_int[i], fine, coarse) for i in idx])
    coarse_int = dt * np.tensordot(coarse.table.q, coarse_states.f, axes=(1, 0))
    return restricted_int - coarse_int


def coarse_correction(fine_states: NodeStates, old_restricted: NodeStates,
                      new_coarse: NodeStates, fine: Level,
                      coarse: Level) -> None:
    """Interpolate the coarse update onto the fine nodes, in place."""
    delta = new_coarse.y - old_restricted.y
    p_t = correction_interpolation(coarse.table.nodes, fine.table.nodes)
    delta_t = np.tensordot(p_t, delta, axes=(1, 0))
    for m in range(fine.table.m + 1):
        fine_states.y[m] = fine_states.y[m] + _space_interp(
            delta_t[m], fine, coarse)
    fine_states.refresh(fine.operator)


@dataclass
class TimeStep:
    """Mutable working state of one time step across the level hierarchy."""

    levels: list[Level]
    states: list[NodeStates]
    y0: list[np.ndarray]
    tau: list[np.ndarray | None] = field(default_factory=list)

    def __post_init__(self):
        if not self.tau:
            self.tau = [None] * len(self.levels)

    @classmethod
    def spread(cls, levels: list[Level], u0: np.ndarray) -> "TimeStep":
        """All nodes of all levels initialized with the initial value."""
        states, y0s = [], []
        u = u0
        prev = None
        for lvl in levels:
            if prev is not None:
                u = restrict_space(u, prev, lvl)
            states.append(NodeStates.spread(lvl.operator, lvl.table, u))
            y0s.append(u.copy())
            prev = lvl
        return cls(levels=levels, states=states, y0=y0s)

    def fine_residual(self, dt: float) -> float:
        return residual(self.states[0], self.y0[0], dt)


class Hooks:
    """Extension points used by the time-parallel engine; no-ops here."""

    def pre_coarse_sweep(self, ts: TimeStep) -> None:
        pass

    def post_sweep(self, level_idx: int, ts: TimeStep) -> None:
        pass


def mlsdc_iteration(ts: TimeStep, dt: float, hooks: Hooks | None = None) -> int:
    """One V-shaped pass over the hierarchy.  Returns V-cycles consumed.

    A single-level hierarchy degenerates to one plain sweep.
    """
    hooks = hooks or Hooks()
    levels, states = ts.levels, ts.states
    n_lvl = len(levels)
    if n_lvl == 1:
        cycles = sdc_sweep(states[0], ts.y0[0], dt, levels[0].operator,
                           levels[0].mg_cfg, levels[0].policy, tau=ts.tau[0])
        hooks.post_sweep(0, ts)
        return cycles

    cycles = 0
    old_restricted: list[NodeStates | None] = [None] * n_lvl
    for l in range(n_lvl - 1):
        restricted = restrict_state(states[l], levels[l], levels[l + 1])
        ts.tau[l + 1] = compute_fas(states[l], restricted, levels[l],
                                    levels[l + 1], dt, fine_tau=ts.tau[l])
        old_restricted[l + 1] = restricted.copy()
        states[l + 1] = restricted
        ts.y0[l + 1] = restricted.y[0].copy()

    hooks.pre_coarse_sweep(ts)  # may replace the coarsest initial value
    lc = n_lvl - 1
    cycles += sdc_sweep(states[lc], ts.y0[lc], dt, levels[lc].operator,
                        levels[lc].mg_cfg, levels[lc].policy, tau=ts.tau[lc])
    hooks.post_sweep(lc, ts)

    for l in range(n_lvl - 2, -1, -1):
        coarse_correction(states[l], old_restricted[l + 1], states[l + 1],
                          levels[l], levels[l + 1])
        ts.y0[l] = states[l].y[0].copy()
        cycles += sdc_sweep(states[l], ts.y0[l], dt, levels[l].operator,
                            levels[l].mg_cfg, levels[l].policy, tau=ts.tau[l])
        hooks.post_sweep(l, ts)
    return cycles


def burn_in(ts: TimeStep, dt: float, n_sweeps: int,
            hooks: Hooks | None = None) -> int:
    """Coarsest-level sweeps used to seed a freshly spread step."""
    hooks = hooks or Hooks()
    levels = ts.levels
    lc = len(levels) - 1
    cycles = 0
    for _ in range(n_sweeps):
        hooks.pre_coarse_sweep(ts)
        cycles += sdc_sweep(ts.states[lc], ts.y0[lc], dt, levels[lc].operator,
                            levels[lc].mg_cfg, levels[lc].policy,
                            tau=ts.tau[lc])
        hooks.post_sweep(lc, ts)
    return cycles


def interpolate_up(ts: TimeStep, spread_copies: list[NodeStates],
                   exact_y0: np.ndarray | None = None) -> None:
    """Propagate the burn-in coarse state to the finer levels.

    `spread_copies[l]` is the pre-burn-in state of level l (the restriction
    of the spread fine state).  When `exact_y0` is given, the fine initial
    value is pinned to it afterwards (rank 0 / serial semantics).
    """
    levels, states = ts.levels, ts.states
    for l in range(len(levels) - 2, -1, -1):
        coarse_correction(states[l], spread_copies[l + 1], states[l + 1],
                          levels[l], levels[l + 1])
        ts.y0[l] = states[l].y[0].copy()
    if exact_y0 is not None:
        ts.y0[0] = exact_y0.copy()
        ts.states[0].y[0] = exact_y0
        ts.states[0].f[0] = levels[0].operator.apply(exact_y0)


def initialize_step(levels: list[Level], u0: np.ndarray, dt: float,
                    n_burn_in: int = 1) -> tuple[TimeStep, int]:
    """Spread the initial value, burn in on the coarsest level, interpolate."""
    ts = TimeStep.spread(levels, u0)
    cycles = 0
    if len(levels) > 1:
        spread_copies = [s.copy() for s in ts.states]
        cycles = burn_in(ts, dt, n_burn_in)
        interpolate_up(ts, spread_copies, exact_y0=u0)
    return ts, cycles


@dataclass
class MlsdcRunResult:
    u: np.ndarray
    iterations: list[int] = field(default_factory=list)
    residuals: list[list[float]] = field(default_factory=list)
    vcycles: int = 0
    exhausted_steps: list[int] = field(default_factory=list)


def run_mlsdc(levels: list[Level], u0: np.ndarray, t_end: float, n_steps: int,
              tol: float, max_iter: int) -> MlsdcRunResult:
    """Serial MLSDC/IMLSDC time stepping with per-step convergence control."""
    check_hierarchy(levels)
    dt = t_end / n_steps
    u = u0
    result = MlsdcRunResult(u=u0)
    for step in range(n_steps):
        ts, cycles = initialize_step(levels, u, dt)
        result.vcycles += cycles
        history = []
        iters = 0
        for _ in range(max_iter):
            result.vcycles += mlsdc_iteration(ts, dt)
            iters += 1
            res = residual(ts.states[0], ts.y0[0], dt)
            history.append(res)
            if res <= tol:
                break
        else:
            result.exhausted_steps.append(step)
        result.iterations.append(iters)
        result.residuals.append(history)
        u = ts.states[0].y[-1].copy()
    result.u = u
    return result
