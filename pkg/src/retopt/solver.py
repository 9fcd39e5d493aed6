"""2D in-plane-polarization FDTD Green's-tensor engine.

Fields E_x, E_y, H_z live on a Yee lattice with a split-field graded absorber
along the boundary. A ramped continuous-wave point current drives the grid at
one angular frequency; the complex steady-state amplitude is extracted by an
on-the-fly discrete Fourier transform accumulated over whole optical cycles,
stopping once successive accumulation blocks agree to a relative tolerance.
One run yields mu0 w^2 G(r, r_src, w) . d_src over the whole grid, i.e. one
column of the Green's tensor, calibrated against the analytic vacuum tensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analytic2d
from .core import INTERIOR_GUARD_CELLS, MU0, DipoleSpec, Grid2D, PermittivityGrid


class SolverError(Exception):
    """Base class for field-solver failures."""


class ConvergenceError(SolverError):
    """DFT accumulation did not settle within the step budget."""


class InstabilityError(SolverError):
    """Field norm diverged; check the Courant factor and absorber profile."""


@dataclass(frozen=True)
class SolverParams:
    """Numerical parameters of a single monochromatic solve."""

    pml_cells: int = 20
    pml_reflection: float = 1e-8   # target normal-incidence power reflection
    pml_grade: float = 2.0         # polynomial grading order of the absorber
    courant: float = 0.7           # c dt / dx, must stay <= 1/sqrt(2) in 2D
    ramp_cycles: int = 10          # raised-cosine source turn-on
    settle_cycles: int = 20        # cycles discarded before DFT accumulation
    dft_cycles: int = 5            # cycles per accumulation block
    convergence_tol: float = 1e-4  # relative change between successive blocks
    max_cycles: int = 2000
    warm_settle_cycles: int = 5    # settle when restarted from a nearby steady state

    def __post_init__(self):
        if not (0.0 < self.courant <= 1.0 / math.sqrt(2.0) + 1e-12):
            raise ValueError(f"courant must be in (0, 1/sqrt(2)], got {self.courant}")
        if self.dft_cycles < 1:
            raise ValueError(f"dft_cycles must be >= 1, got {self.dft_cycles}")
        if self.convergence_tol <= 0:
            raise ValueError(f"convergence_tol must be > 0, got {self.convergence_tol}")
        if self.pml_cells < 4:
            raise ValueError(f"pml_cells must be >= 4, got {self.pml_cells}")


@dataclass(eq=False)
class EngineState:
    """End-of-run time-domain snapshot, usable to warm-start the next solve on
    a slightly perturbed geometry (saved at a whole-cycle phase boundary)."""

    ex: np.ndarray
    ey: np.ndarray
    hzx: np.ndarray
    hzy: np.ndarray


@dataclass(eq=False)
class GreensField:
    """Complex in-plane response field of one point-dipole source.

    ``ex``/``ey`` are cell-center collocated phasors equal to
    mu0 w^2 G(r, r_src, w) . d_src in internal units.
    """

    grid: Grid2D
    source: DipoleSpec
    omega: float
    ex: np.ndarray
    ey: np.ndarray
    pml_cells: int

    def __post_init__(self):
        self.ex.setflags(write=False)
        self.ey.setflags(write=False)

    def magnitude(self) -> np.ndarray:
        """|E| over the grid, for inspection dumps."""
        return np.sqrt(np.abs(self.ex) ** 2 + np.abs(self.ey) ** 2)

    def interior_slice(self) -> tuple[slice, slice]:
        m = self.pml_cells + INTERIOR_GUARD_CELLS
        return slice(m, self.grid.nx - m), slice(m, self.grid.ny - m)


def _absorber_sigma(node_pos: np.ndarray, n_cells: int, params: SolverParams, dx: float) -> np.ndarray:
    """Graded conductivity at (possibly half-integer) node positions along one axis."""
    width = params.pml_cells
    sigma_max = -(params.pml_grade + 1.0) * math.log(params.pml_reflection) / (2.0 * width * dx)
    depth = np.maximum(width - node_pos, node_pos - (n_cells - 1 - width))
    depth = np.clip(depth / width, 0.0, None)
    return sigma_max * depth ** params.pml_grade


class _FdtdEngine:
    """Time stepper for one grid/material/frequency combination.

    The engine is deliberately dumb: callers drive it step by step with a
    source amplitude and read the Yee arrays; the solve loop above it owns
    ramping, DFT accumulation and convergence logic.
    """

    def __init__(self, grid: Grid2D, eps: np.ndarray, omega: float, params: SolverParams):
        nx, ny, dx = grid.nx, grid.ny, grid.dx
        interior = min(nx, ny) - 2 * (params.pml_cells + INTERIOR_GUARD_CELLS)
        if interior < 8:
            raise SolverError(f"grid {nx}x{ny} leaves only {interior} interior cells inside the absorber")
        self.grid, self.omega, self.params = grid, omega, params

        period = 2.0 * math.pi / omega
        self.steps_per_cycle = max(int(math.ceil(period / (params.courant * dx))), 4)
        self.dt = period / self.steps_per_cycle

        self.ex = np.zeros((nx - 1, ny))
        self.ey = np.zeros((nx, ny - 1))
        self.hzx = np.zeros((nx - 1, ny - 1))
        self.hzy = np.zeros((nx - 1, ny - 1))

        # material sampled at E nodes: mean of the two adjacent cells
        self.eps_ex = 0.5 * (eps[:-1, :] + eps[1:, :])
        self.eps_ey = 0.5 * (eps[:, :-1] + eps[:, 1:])

        dt = self.dt
        sx_int = _absorber_sigma(np.arange(nx, dtype=float), nx, params, dx)
        sy_int = _absorber_sigma(np.arange(ny, dtype=float), ny, params, dx)
        sx_half = _absorber_sigma(np.arange(nx - 1) + 0.5, nx, params, dx)
        sy_half = _absorber_sigma(np.arange(ny - 1) + 0.5, ny, params, dx)

        def decay(sig):
            return (1.0 - 0.5 * sig * dt) / (1.0 + 0.5 * sig * dt)

        # E_x damped by sigma_y, E_y by sigma_x; H_z split into x/y parts
        self.ca_ex = decay(sy_int)[None, :]
        self.cb_ex = (dt / dx) / (1.0 + 0.5 * sy_int[None, :] * dt) / self.eps_ex
        self.ca_ey = decay(sx_int)[:, None]
        self.cb_ey = (dt / dx) / (1.0 + 0.5 * sx_int[:, None] * dt) / self.eps_ey
        self.ca_hx = decay(sx_half)[:, None]
        self.cb_hx = (dt / dx) / (1.0 + 0.5 * sx_half[:, None] * dt)
        self.ca_hy = decay(sy_half)[None, :]
        self.cb_hy = (dt / dx) / (1.0 + 0.5 * sy_half[None, :] * dt)

        self._src_ex: list[tuple[int, int, float]] = []
        self._src_ey: list[tuple[int, int, float]] = []

    def set_source(self, src: DipoleSpec):
        """Soft current source: bilinear cell weights split onto the two
        adjacent E nodes of each component (the transpose of the collocation
        used when reading fields out, which keeps the discrete system
        reciprocal)."""
        grid, dx = self.grid, self.grid.dx
        fx = (src.position[0] - grid.origin[0]) / dx
        fy = (src.position[1] - grid.origin[1]) / dx
        i0, j0 = int(math.floor(fx)), int(math.floor(fy))
        tx, ty = fx - i0, fy - j0
        cell_w = [(i0, j0, (1 - tx) * (1 - ty)), (i0 + 1, j0, tx * (1 - ty)),
                  (i0, j0 + 1, (1 - tx) * ty), (i0 + 1, j0 + 1, tx * ty)]
        ex_w: dict[tuple[int, int], float] = {}
        ey_w: dict[tuple[int, int], float] = {}
        dpx, dpy = src.orientation
        for i, j, w in cell_w:
            if w == 0.0:
                continue
            for node in ((i - 1, j), (i, j)):        # E_x nodes flanking cell (i, j)
                ex_w[node] = ex_w.get(node, 0.0) + 0.5 * w * dpx
            for node in ((i, j - 1), (i, j)):        # E_y nodes flanking cell (i, j)
                ey_w[node] = ey_w.get(node, 0.0) + 0.5 * w * dpy
        area = dx * dx
        self._src_ex = [(i, j, w / area) for (i, j), w in ex_w.items() if w != 0.0]
        self._src_ey = [(i, j, w / area) for (i, j), w in ey_w.items() if w != 0.0]

    def step(self, j_amp: float):
        """Advance H then E by one dt, driving the current source at j_amp."""
        ex, ey = self.ex, self.ey
        self.hzx *= self.ca_hx
        self.hzx -= self.cb_hx * (ey[1:, :] - ey[:-1, :])
        self.hzy *= self.ca_hy
        self.hzy += self.cb_hy * (ex[:, 1:] - ex[:, :-1])
        hz = self.hzx + self.hzy

        ex[:, 1:-1] *= self.ca_ex[:, 1:-1]
        ex[:, 1:-1] += self.cb_ex[:, 1:-1] * (hz[:, 1:] - hz[:, :-1])
        ey[1:-1, :] *= self.ca_ey[1:-1, :]
        ey[1:-1, :] -= self.cb_ey[1:-1, :] * (hz[1:, :] - hz[:-1, :])

        if j_amp != 0.0:
            dt = self.dt
            for i, j, w in self._src_ex:
                ex[i, j] -= dt / self.eps_ex[i, j] * w * j_amp
            for i, j, w in self._src_ey:
                ey[i, j] -= dt / self.eps_ey[i, j] * w * j_amp

    def field_energy(self) -> float:
        """Total discrete field energy (arbitrary units)."""
        dx2 = self.grid.dx ** 2
        hz = self.hzx + self.hzy
        return 0.5 * dx2 * (float(np.sum(self.eps_ex * self.ex ** 2))
                            + float(np.sum(self.eps_ey * self.ey ** 2))
                            + float(np.sum(hz ** 2)))


def _collocate(yee_x: np.ndarray, yee_y: np.ndarray, nx: int, ny: int):
    """Average staggered E nodes onto cell centers."""
    exc = np.zeros((nx, ny), dtype=complex)
    exc[1:-1, :] = 0.5 * (yee_x[:-1, :] + yee_x[1:, :])
    exc[0, :], exc[-1, :] = yee_x[0, :], yee_x[-1, :]
    eyc = np.zeros((nx, ny), dtype=complex)
    eyc[:, 1:-1] = 0.5 * (yee_y[:, :-1] + yee_y[:, 1:])
    eyc[:, 0], eyc[:, -1] = yee_y[:, 0], yee_y[:, -1]
    return exc, eyc


def _run_to_steady_state(engine: _FdtdEngine, params: SolverParams,
                         warm: EngineState | None = None):
    """Drive the ramped CW source until the block DFT converges.

    Returns collocated complex phasor arrays (cell centers) plus the final
    time-domain snapshot. A warm snapshot from a nearby geometry skips the
    ramp and most of the settling: only the perturbation transient remains.
    """
    spc = engine.steps_per_cycle
    dt = engine.dt
    omega = engine.omega
    if warm is not None:
        engine.ex[:] = warm.ex
        engine.ey[:] = warm.ey
        engine.hzx[:] = warm.hzx
        engine.hzy[:] = warm.hzy
        ramp_steps = 0
        start_step = params.warm_settle_cycles * spc
    else:
        ramp_steps = params.ramp_cycles * spc
        start_step = (params.ramp_cycles + params.settle_cycles) * spc
    block_steps = params.dft_cycles * spc
    max_steps = params.max_cycles * spc

    # exact per-step phase tables; t_mid drives the source, t_e weights the DFT
    m = np.arange(spc)
    cos_tab = np.cos(2.0 * math.pi * m / spc)
    sin_tab = np.sin(2.0 * math.pi * m / spc)

    acc_xr = np.zeros_like(engine.ex)
    acc_xi = np.zeros_like(engine.ex)
    acc_yr = np.zeros_like(engine.ey)
    acc_yi = np.zeros_like(engine.ey)
    prev_px = prev_py = None
    last_rel = math.inf

    n = 0
    while n < max_steps:
        t_mid = (n + 0.5) * dt
        if n < ramp_steps:
            envelope = 0.5 * (1.0 - math.cos(math.pi * t_mid / (ramp_steps * dt)))
        else:
            envelope = 1.0
        engine.step(envelope * math.sin(omega * t_mid))
        n += 1
        if n <= start_step:
            continue
        k = n % spc
        acc_xr += engine.ex * (cos_tab[k] * dt)
        acc_xi += engine.ex * (sin_tab[k] * dt)
        acc_yr += engine.ey * (cos_tab[k] * dt)
        acc_yi += engine.ey * (sin_tab[k] * dt)
        if (n - start_step) % block_steps == 0:
            scale = 2.0 / (block_steps * dt)
            px = (acc_xr + 1j * acc_xi) * scale
            py = (acc_yr + 1j * acc_yi) * scale
            acc_xr[:] = 0.0
            acc_xi[:] = 0.0
            acc_yr[:] = 0.0
            acc_yi[:] = 0.0
            norm = math.sqrt(float(np.sum(np.abs(px) ** 2) + np.sum(np.abs(py) ** 2)))
            if not math.isfinite(norm) or norm > 1e30:
                raise InstabilityError(
                    "field norm diverged; check courant <= 1/sqrt(2) and the absorber profile")
            if prev_px is not None:
                diff = math.sqrt(float(np.sum(np.abs(px - prev_px) ** 2)
                                       + np.sum(np.abs(py - prev_py) ** 2)))
                last_rel = diff / max(norm, 1e-300)
                if last_rel < params.convergence_tol:
                    exc, eyc = _collocate(px, py, engine.grid.nx, engine.grid.ny)
                    snapshot = EngineState(np.array(engine.ex), np.array(engine.ey),
                                           np.array(engine.hzx), np.array(engine.hzy))
                    return exc, eyc, snapshot
            prev_px, prev_py = px, py
    raise ConvergenceError(
        f"DFT not converged after {params.max_cycles} cycles (last relative change {last_rel:.3e})")


def _solve_raw(grid: Grid2D, eps: np.ndarray, src: DipoleSpec, params: SolverParams,
               warm: EngineState | None = None):
    engine = _FdtdEngine(grid, eps, src.omega, params)
    engine.set_source(src)
    return _run_to_steady_state(engine, params, warm)


_calibration_cache: dict = {}


def vacuum_calibration(grid: Grid2D, omega: float, params: SolverParams) -> complex:
    """Complex factor mapping raw DFT phasors onto mu0 w^2 G . d.

    Computed once per (grid, omega, params) from an all-vacuum run: a unit
    x-oriented dipole at the central cell is probed transversally at the
    reference separation (half a wavelength, but never closer than 8 cells)
    and matched to the analytic vacuum tensor. The factor absorbs every
    discretization constant of the source and time stepping.
    """
    key = (grid, omega, params)
    if key in _calibration_cache:
        return _calibration_cache[key]
    ci, cj = grid.nx // 2, grid.ny // 2
    src_pos = grid.index_to_world(ci, cj)
    margin = params.pml_cells + INTERIOR_GUARD_CELLS
    ref_cells = max(int(round(0.5 * (2.0 * math.pi / omega) / grid.dx)), 8)
    ref_cells = min(ref_cells, grid.ny - 1 - margin - cj)
    if ref_cells < 4:
        raise SolverError("grid too small to calibrate: no room for the reference separation")
    src = DipoleSpec(tuple(src_pos), (1.0, 0.0), omega)
    exc, _, _ = _solve_raw(grid, np.ones(grid.shape), src, params)
    numeric = exc[ci, cj + ref_cells]
    probe_pos = grid.index_to_world(ci, cj + ref_cells)
    g = analytic2d.vacuum_green_2d(probe_pos, src_pos, omega)
    analytic = MU0 * omega ** 2 * g[0, 0]
    factor = analytic / numeric
    _calibration_cache[key] = factor
    return factor


def solve_with_state(eps: PermittivityGrid, src: DipoleSpec, params: SolverParams,
                     calibration: complex | None = None,
                     warm: EngineState | None = None) -> tuple[GreensField, EngineState]:
    """solve_green_column plus the end-of-run time-domain snapshot, optionally
    warm-started from a snapshot taken on a nearby geometry (the optimizer
    chains these, paying only for the perturbation transient per step)."""
    grid = eps.grid
    margin = params.pml_cells + INTERIOR_GUARD_CELLS
    i, j = grid.world_to_index(src.position)
    if not (margin <= i < grid.nx - margin and margin <= j < grid.ny - margin):
        raise SolverError(f"source at {src.position} lies inside the absorbing boundary")
    if calibration is None:
        calibration = vacuum_calibration(grid, src.omega, params)
    exc, eyc, snapshot = _solve_raw(grid, eps.eps, src, params, warm)
    field = GreensField(grid, src, src.omega, exc * calibration, eyc * calibration,
                        params.pml_cells)
    return field, snapshot


def solve_green_column(eps: PermittivityGrid, src: DipoleSpec, params: SolverParams,
                       calibration: complex | None = None) -> GreensField:
    """Steady-state complex response to a unit point dipole at src.

    The returned field equals mu0 w^2 G(r, r_src, w) . d_src on cell centers,
    calibrated so an all-vacuum grid reproduces the analytic line-dipole
    tensor. Raises ConvergenceError / InstabilityError on failure.
    """
    field, _ = solve_with_state(eps, src, params, calibration)
    return field


def probe(field: GreensField, r, d_probe) -> complex:
    """Bilinear interpolation of the collocated field contracted with d_probe,
    i.e. mu0 w^2 d_probe . G(r, r_src, w) . d_src."""
    grid = field.grid
    fx = (r[0] - grid.origin[0]) / grid.dx
    fy = (r[1] - grid.origin[1]) / grid.dx
    margin = field.pml_cells + INTERIOR_GUARD_CELLS
    if not (margin <= round(fx) <= grid.nx - 1 - margin
            and margin <= round(fy) <= grid.ny - 1 - margin):
        raise ValueError(f"probe point {tuple(r)} is outside the usable interior")
    i0 = min(int(math.floor(fx)), grid.nx - 2)
    j0 = min(int(math.floor(fy)), grid.ny - 2)
    tx, ty = fx - i0, fy - j0
    w = ((1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty)
    cells = ((i0, j0), (i0 + 1, j0), (i0, j0 + 1), (i0 + 1, j0 + 1))
    vx = sum(wk * field.ex[c] for wk, c in zip(w, cells))
    vy = sum(wk * field.ey[c] for wk, c in zip(w, cells))
    return d_probe[0] * vx + d_probe[1] * vy
