"""The two design loops: greedy block placement and level-set boundary evolution.

The additive scheme alternates two field solves (source at the donor, source
at the acceptor) with one block write at the cell of maximal predicted merit
gain; the rate is re-simulated after every write, and that re-simulation is
reused as the next iteration's donor field, so a full iteration costs two
solves. The level-set scheme instead evolves an implicit boundary with the
normal velocity set to the same per-cell integrand, which makes the
first-order merit change a sum of squares and hence non-negative.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from . import output
from .core import INTERIOR_GUARD_CELLS, DipoleSpec, Grid2D, PermittivityGrid, RunConfig
from .merit import (DeltaFMap, eligibility_mask, ret_delta_integrand, ret_delta_map,
                    ret_rate)
from .solver import (GreensField, SolverError, solve_green_column, solve_with_state,
                     vacuum_calibration)


class NoImprovementStop(Exception):
    """Best eligible predicted gain is <= 0; placing more material would hurt."""


@dataclass
class HistoryEntry:
    iteration: int
    cell: tuple[int, int]
    delta_f: float
    gamma: float
    purcell: float


@dataclass(eq=False)
class OptimizationState:
    """Immutable-by-convention snapshot of a greedy run after ``iteration`` steps."""

    eps: PermittivityGrid
    iteration: int
    history: list[HistoryEntry]
    filled: np.ndarray
    gamma_vacuum: float
    rng_seed: int = 0  # tie-breaking is deterministic (lowest row-major index), never consulted
    field_d: GreensField | None = field(default=None, repr=False)  # donor solve on eps, if cached
    stop_reason: str | None = None


def _block_origin(cell: tuple[int, int], block_size: int) -> tuple[int, int]:
    off = (block_size - 1) // 2
    return cell[0] - off, cell[1] - off


def _footprint_eligible(cell_ok: np.ndarray, block_size: int) -> np.ndarray:
    """Centers whose whole block footprint lands on allowed cells."""
    if block_size == 1:
        return np.array(cell_ok)
    off = (block_size - 1) // 2
    padded = np.zeros((cell_ok.shape[0] + block_size, cell_ok.shape[1] + block_size), dtype=bool)
    padded[off:off + cell_ok.shape[0], off:off + cell_ok.shape[1]] = cell_ok
    out = np.ones_like(cell_ok)
    for di in range(block_size):
        for dj in range(block_size):
            out &= padded[di:di + cell_ok.shape[0], dj:dj + cell_ok.shape[1]]
    return out


class _WarmChain:
    """Per-source label chain of time-domain snapshots: each solve restarts
    from the steady state of the previous geometry, which differs by one block."""

    def __init__(self, params, calibration):
        self.params = params
        self.calibration = calibration
        self.snapshots: dict[str, object] = {}

    def solve(self, eps: PermittivityGrid, src: DipoleSpec, label: str) -> GreensField:
        field, snap = solve_with_state(eps, src, self.params, self.calibration,
                                       warm=self.snapshots.get(label))
        self.snapshots[label] = snap
        return field


def _cold_solver(params, calibration):
    def solve(eps, src, label):
        return solve_green_column(eps, src, params, calibration)
    return solve


def initial_state(cfg: RunConfig, eps: PermittivityGrid | None = None,
                  solve_fn=None) -> OptimizationState:
    """Fresh state on ``eps`` (vacuum by default) with the vacuum rate solved."""
    grid = cfg.grid
    eps = eps if eps is not None else PermittivityGrid.vacuum(grid)
    cal = vacuum_calibration(grid, cfg.donor.omega, cfg.solver)
    if solve_fn is None:
        solve_fn = _cold_solver(cfg.solver, cal)
    if np.all(eps.eps == 1.0):
        field_d = solve_fn(eps, cfg.donor, "donor")
        vac_field = field_d
    else:
        vac_field = solve_green_column(PermittivityGrid.vacuum(grid), cfg.donor,
                                       cfg.solver, cal)
        field_d = solve_fn(eps, cfg.donor, "donor")
    gamma_vac = ret_rate(vac_field, cfg.acceptor)
    return OptimizationState(eps=eps, iteration=0, history=[],
                             filled=np.zeros(grid.shape, dtype=bool),
                             gamma_vacuum=gamma_vac, field_d=field_d)


def candidate_mask(state: OptimizationState, cfg: RunConfig) -> np.ndarray:
    cell_ok = eligibility_mask(cfg.grid, cfg.donor, cfg.acceptor, cfg.exclusion_radius,
                               cfg.solver.pml_cells, filled=state.filled)
    return _footprint_eligible(cell_ok, cfg.block_size)


def additive_step(state: OptimizationState, cfg: RunConfig,
                  solve_fn=None) -> OptimizationState:
    """One greedy iteration: two solves, a delta-F map, one block write, and a
    re-simulated rate for the new geometry.

    Raises NoImprovementStop when the best eligible prediction is <= 0 and
    ValueError when no cell is eligible; solver failures propagate with the
    input state untouched.
    """
    mask = candidate_mask(state, cfg)
    if not mask.any():
        raise ValueError("no eligible cells remain for block placement")
    cal = vacuum_calibration(cfg.grid, cfg.donor.omega, cfg.solver)
    if solve_fn is None:
        solve_fn = _cold_solver(cfg.solver, cal)
    field_d = state.field_d
    if field_d is None:
        field_d = solve_fn(state.eps, cfg.donor, "donor")
    field_a = solve_fn(state.eps, cfg.acceptor, "acceptor")
    dmap = ret_delta_map(field_d, field_a, cfg.donor, cfg.acceptor, mask)
    cell = dmap.argmax()
    best = float(dmap.values[cell])
    if best <= 0.0:
        raise NoImprovementStop(f"best eligible delta-F is {best:.3e}")

    i0, j0 = _block_origin(cell, cfg.block_size)
    new_eps = state.eps.with_block(i0, j0, cfg.block_size, cfg.eps_inclusion)
    filled = np.array(state.filled)
    filled[i0:i0 + cfg.block_size, j0:j0 + cfg.block_size] = True

    new_field_d = solve_fn(new_eps, cfg.donor, "donor")
    gamma = ret_rate(new_field_d, cfg.acceptor)
    entry = HistoryEntry(state.iteration + 1, (int(cell[0]), int(cell[1])), best,
                         gamma, gamma / state.gamma_vacuum)
    return OptimizationState(eps=new_eps, iteration=state.iteration + 1,
                             history=state.history + [entry], filled=filled,
                             gamma_vacuum=state.gamma_vacuum, rng_seed=state.rng_seed,
                             field_d=new_field_d)


def run_additive(cfg: RunConfig, out_dir: str | None = None,
                 progress=None) -> OptimizationState:
    """Greedy loop for up to cfg.max_iterations steps, stopping early when no
    eligible placement predicts an improvement. Solver failures end the run
    gracefully with the history collected so far.

    Solves are chained: each restarts from the previous steady state, so only
    the one-block perturbation transient has to settle.
    """
    cal = vacuum_calibration(cfg.grid, cfg.donor.omega, cfg.solver)
    chain = _WarmChain(cfg.solver, cal)
    state = initial_state(cfg, solve_fn=chain.solve)
    out_dir = out_dir if out_dir is not None else cfg.out_dir
    aborted = None
    for _ in range(cfg.max_iterations):
        try:
            state = additive_step(state, cfg, solve_fn=chain.solve)
        except NoImprovementStop as stop:
            aborted = f"stopped: {stop}"
            break
        except SolverError as err:
            aborted = f"solver failure at iteration {state.iteration + 1}: {err}"
            break
        if progress is not None:
            progress(state)
        if out_dir and cfg.snapshot_every > 0 and state.iteration % cfg.snapshot_every == 0:
            output.write_design(out_dir, f"{state.iteration:04d}", state.eps)
            output.write_history(os.path.join(out_dir, "history.csv"), state.history)
    state = replace(state, stop_reason=aborted)
    if out_dir:
        output.write_design(out_dir, "final", state.eps)
        output.write_history(os.path.join(out_dir, "history.csv"), state.history)
        final_fp = state.history[-1].purcell if state.history else 1.0
        output.write_metadata(os.path.join(out_dir, "metadata.yaml"), cfg,
                              {"iterations": state.iteration, "final_purcell": final_fp,
                               "gamma_vacuum": state.gamma_vacuum,
                               "note": aborted or "completed"})
    return state


# --- level-set boundary evolution ------------------------------------------


@dataclass(eq=False)
class LevelSetField:
    """Implicit boundary: phi < 0 inside material, > 0 outside, 0 on the boundary."""

    grid: Grid2D
    phi: np.ndarray
    dt: float = 0.0
    steps: int = 0


def seed_circle(grid: Grid2D, center, radius: float) -> LevelSetField:
    """Signed-distance circle: the canonical demo seed."""
    xx, yy = grid.meshgrid()
    phi = np.sqrt((xx - center[0]) ** 2 + (yy - center[1]) ** 2) - radius
    return LevelSetField(grid, phi)


def _gradient_magnitudes(phi: np.ndarray, dx: float):
    """Godunov upwind gradient magnitudes (g_plus for outward motion v > 0,
    g_minus for v < 0), with replicated edges."""
    p = np.pad(phi, 1, mode="edge")
    dmx = (p[1:-1, 1:-1] - p[:-2, 1:-1]) / dx
    dpx = (p[2:, 1:-1] - p[1:-1, 1:-1]) / dx
    dmy = (p[1:-1, 1:-1] - p[1:-1, :-2]) / dx
    dpy = (p[1:-1, 2:] - p[1:-1, 1:-1]) / dx
    g_plus = np.sqrt(np.maximum(dmx, 0) ** 2 + np.minimum(dpx, 0) ** 2
                     + np.maximum(dmy, 0) ** 2 + np.minimum(dpy, 0) ** 2)
    g_minus = np.sqrt(np.minimum(dmx, 0) ** 2 + np.maximum(dpx, 0) ** 2
                      + np.minimum(dmy, 0) ** 2 + np.maximum(dpy, 0) ** 2)
    return g_plus, g_minus


def _interface_adjacent(phi: np.ndarray) -> np.ndarray:
    """Cells with a sign change to a 4-neighbor: these carry the boundary."""
    sgn = phi >= 0.0
    edge = np.zeros_like(sgn)
    edge[:-1, :] |= sgn[:-1, :] != sgn[1:, :]
    edge[1:, :] |= sgn[1:, :] != sgn[:-1, :]
    edge[:, :-1] |= sgn[:, :-1] != sgn[:, 1:]
    edge[:, 1:] |= sgn[:, 1:] != sgn[:, :-1]
    return edge


def reinitialize(phi: np.ndarray, dx: float, iterations: int = 10,
                 band_tolerance: float = 0.1) -> np.ndarray:
    """Relax phi back toward a signed distance function (|grad phi| = 1).

    Interface-adjacent cells are frozen so the zero contour never moves, and
    the pass is skipped entirely while the boundary band still satisfies
    |grad phi| = 1 to within ``band_tolerance`` (so re-distancing an already
    clean field is an exact no-op)."""
    gp0, gm0 = _gradient_magnitudes(phi, dx)
    grad0 = np.maximum(gp0, gm0)
    band = np.abs(phi) < 2.0 * dx
    if band.any() and np.max(np.abs(grad0[band] - 1.0)) <= band_tolerance:
        return phi
    frozen = _interface_adjacent(phi)
    sign = phi / np.sqrt(phi ** 2 + (grad0 * dx) ** 2 + 1e-300)
    out = np.array(phi)
    dtau = 0.5 * dx
    for _ in range(iterations):
        gp, gm = _gradient_magnitudes(out, dx)
        upd = out - dtau * (np.maximum(sign, 0) * gp + np.minimum(sign, 0) * gm - sign)
        out = np.where(frozen, out, upd)
    return out


def levelset_velocity(field_d: GreensField, field_a: GreensField, donor: DipoleSpec,
                      acceptor: DipoleSpec, phi_field: LevelSetField,
                      allowed: np.ndarray | None = None,
                      band_halfwidth_cells: float = 2.0,
                      alpha_n: float = 1.0) -> np.ndarray:
    """Normal boundary velocity: the merit-change integrand on the boundary
    band, extended off-band by the value at the nearest band cell (constant
    extension along the distance gradient). Cells where material may not be
    placed get zero velocity; the whole field scales linearly with the
    inclusion strength alpha_n."""
    phi = phi_field.phi
    dx = phi_field.grid.dx
    band = np.abs(phi) < band_halfwidth_cells * dx
    if not band.any():
        raise ValueError("level-set boundary band is empty")
    integrand = alpha_n * ret_delta_integrand(field_d, field_a, acceptor)
    # sample on the outer shell where the Born "add material here" reading holds
    shell = band & (phi >= 0.0)
    if not shell.any():
        shell = band
    _, (ix, iy) = ndimage.distance_transform_edt(~shell, return_indices=True)
    v = integrand[ix, iy]
    v[shell] = integrand[shell]
    if allowed is not None:
        v = np.where(allowed, v, 0.0)
    return v


def levelset_evolve(phi_field: LevelSetField, v_n: np.ndarray, dt: float,
                    reinit_every: int = 5, reinit_iterations: int = 10) -> LevelSetField:
    """One upwind advection step of phi_t + v_n |grad phi| = 0, with periodic
    re-distancing. Rejects steps that violate the CFL bound dt <= 0.5 dx / max|v|."""
    dx = phi_field.grid.dx
    vmax = float(np.max(np.abs(v_n)))
    if vmax > 0 and dt > 0.5 * dx / vmax * (1 + 1e-12):
        raise ValueError(f"CFL violation: dt = {dt:.3e} exceeds 0.5 dx / max|v| = {0.5 * dx / vmax:.3e}")
    gp, gm = _gradient_magnitudes(phi_field.phi, dx)
    phi = phi_field.phi - dt * (np.maximum(v_n, 0) * gp + np.minimum(v_n, 0) * gm)
    steps = phi_field.steps + 1
    if reinit_every > 0 and steps % reinit_every == 0:
        phi = reinitialize(phi, dx, reinit_iterations)
    return LevelSetField(phi_field.grid, phi, dt, steps)


def material_from_phi(phi_field: LevelSetField, eps_inclusion: float,
                      allowed: np.ndarray | None = None) -> PermittivityGrid:
    inside = phi_field.phi < 0.0
    if allowed is not None:
        inside &= allowed
    eps = np.where(inside, eps_inclusion, 1.0)
    return PermittivityGrid(phi_field.grid, eps)


@dataclass
class LevelSetHistoryEntry:
    iteration: int
    gamma: float
    purcell: float
    predicted_df: float  # sum over the band of v^2 dA dt, >= 0 by construction


@dataclass(eq=False)
class LevelSetResult:
    phi: LevelSetField
    eps: PermittivityGrid
    history: list[LevelSetHistoryEntry]
    gamma_vacuum: float


def predicted_boundary_gain(phi_field: LevelSetField, v_n: np.ndarray, dt: float) -> float:
    """First-order merit change sum_band v_n^2 dA dt with a smeared-interface
    area weight; non-negative term by term."""
    phi = phi_field.phi
    dx = phi_field.grid.dx
    eps_w = 1.5 * dx
    w = np.where(np.abs(phi) < eps_w, 0.5 * (1.0 + np.cos(math.pi * phi / eps_w)) / eps_w, 0.0)
    gp, gm = _gradient_magnitudes(phi, dx)
    grad = np.maximum(gp, gm)
    return float(np.sum(v_n ** 2 * w * grad * dx * dx) * dt)


def run_levelset(cfg: RunConfig, out_dir: str | None = None, progress=None) -> LevelSetResult:
    """Demo boundary-evolution loop: seed circle from cfg.levelset, auto time
    step at the CFL bound, rate re-simulated after each step."""
    grid = cfg.grid
    opts = cfg.levelset
    cal = vacuum_calibration(grid, cfg.donor.omega, cfg.solver)
    allowed = eligibility_mask(grid, cfg.donor, cfg.acceptor, cfg.exclusion_radius,
                               cfg.solver.pml_cells)
    vac = PermittivityGrid.vacuum(grid)
    gamma_vac = ret_rate(solve_green_column(vac, cfg.donor, cfg.solver, cal), cfg.acceptor)

    phi = seed_circle(grid, opts.seed_center, opts.seed_radius)
    eps = material_from_phi(phi, cfg.eps_inclusion, allowed)
    field_d = solve_green_column(eps, cfg.donor, cfg.solver, cal)
    history = [LevelSetHistoryEntry(0, ret_rate(field_d, cfg.acceptor),
                                    ret_rate(field_d, cfg.acceptor) / gamma_vac, 0.0)]
    out_dir = out_dir if out_dir is not None else cfg.out_dir
    for it in range(1, opts.steps + 1):
        field_a = solve_green_column(eps, cfg.acceptor, cfg.solver, cal)
        v = levelset_velocity(field_d, field_a, cfg.donor, cfg.acceptor, phi, allowed,
                              opts.band_halfwidth_cells, cfg.alpha_n)
        vmax = float(np.max(np.abs(v)))
        if vmax == 0.0:
            break
        dt = opts.cfl * grid.dx / vmax
        predicted = predicted_boundary_gain(phi, v, dt)
        phi = levelset_evolve(phi, v, dt, opts.reinit_every)
        eps = material_from_phi(phi, cfg.eps_inclusion, allowed)
        field_d = solve_green_column(eps, cfg.donor, cfg.solver, cal)
        gamma = ret_rate(field_d, cfg.acceptor)
        history.append(LevelSetHistoryEntry(it, gamma, gamma / gamma_vac, predicted))
        if progress is not None:
            progress(history[-1])
    if out_dir:
        output.write_design(out_dir, "levelset_final", eps)
        output.write_csv(os.path.join(out_dir, "levelset_history.csv"),
                         ["iteration", "gamma", "purcell", "predicted_df"],
                         ((h.iteration, h.gamma, h.purcell, h.predicted_df) for h in history))
        output.write_metadata(os.path.join(out_dir, "metadata.yaml"), cfg,
                              {"steps": len(history) - 1,
                               "final_purcell": history[-1].purcell,
                               "gamma_vacuum": gamma_vac})
    return LevelSetResult(phi, eps, history, gamma_vac)
