"""Shared domain types, units policy, configuration and grid geometry.

Internal unit system: all lengths are in micrometers and c = mu0 = hbar = 1,
so angular frequencies carry units of c/um (omega = 2*pi/lambda) and time is
measured in um/c. Every physical quantity this package reports is a
dimensionless ratio (Purcell factor, relative rates, map argmax positions),
so the absolute prefactor convention cancels identically and results are
scale-invariant: rescaling all lengths together with 1/omega changes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

C = 1.0
MU0 = 1.0
HBAR = 1.0

#: Cells kept between the absorbing layer and any source/probe/material.
INTERIOR_GUARD_CELLS = 2


class ConfigError(Exception):
    """Malformed or invalid run configuration; message names the offending field."""


def omega_from_wavelength(wavelength_um: float) -> float:
    """Angular frequency (c/um units) for a free-space wavelength in um."""
    if wavelength_um <= 0:
        raise ConfigError(f"wavelength must be positive, got {wavelength_um}")
    return 2.0 * math.pi * C / wavelength_um


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2D Cartesian grid of square cells.

    ``origin`` is the physical coordinate of the center of cell (0, 0);
    cell (i, j) is centered at origin + (i*dx, j*dx).
    """

    nx: int
    ny: int
    dx: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.dx <= 0:
            raise ValueError(f"grid.dx must be > 0, got {self.dx}")
        if self.nx < 16 or self.ny < 16:
            raise ValueError(f"grid must be at least 16x16 cells, got {self.nx}x{self.ny}")

    @classmethod
    def centered(cls, nx: int, ny: int, dx: float) -> "Grid2D":
        """Grid whose cell-center cloud is centered on the coordinate origin."""
        return cls(nx, ny, dx, (-0.5 * (nx - 1) * dx, -0.5 * (ny - 1) * dx))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def index_to_world(self, i: int, j: int) -> np.ndarray:
        return np.array([self.origin[0] + i * self.dx, self.origin[1] + j * self.dx])

    def world_to_index(self, p) -> tuple[int, int]:
        """Nearest-cell-center index; exact round-trip for cell centers."""
        i = int(round((p[0] - self.origin[0]) / self.dx))
        j = int(round((p[1] - self.origin[1]) / self.dx))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"point {tuple(p)} is outside the grid")
        return i, j

    def contains(self, p) -> bool:
        i = round((p[0] - self.origin[0]) / self.dx)
        j = round((p[1] - self.origin[1]) / self.dx)
        return 0 <= i < self.nx and 0 <= j < self.ny

    @property
    def xs(self) -> np.ndarray:
        """Cell-center x coordinates, shape (nx,)."""
        return self.origin[0] + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.dx * np.arange(self.ny)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinate arrays X, Y of shape (nx, ny)."""
        return np.meshgrid(self.xs, self.ys, indexing="ij")


@dataclass(eq=False)
class PermittivityGrid:
    """Relative permittivity map eps(r) >= 1 on a Grid2D; immutable once built."""

    grid: Grid2D
    eps: np.ndarray

    def __post_init__(self):
        eps = np.array(self.eps, dtype=float)
        if eps.shape != self.grid.shape:
            raise ValueError(f"eps shape {eps.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(eps)):
            raise ValueError("eps must be finite everywhere")
        if np.any(eps < 1.0):
            raise ValueError(f"eps must be >= 1 everywhere, min is {eps.min()}")
        eps.setflags(write=False)
        self.eps = eps

    @classmethod
    def vacuum(cls, grid: Grid2D) -> "PermittivityGrid":
        return cls(grid, np.ones(grid.shape))

    def with_block(self, i0: int, j0: int, size: int, value: float) -> "PermittivityGrid":
        """New map with a size x size block of cells set to ``value``.

        The block covers cells [i0, i0+size) x [j0, j0+size); callers are
        responsible for keeping it inside the grid.
        """
        if not (0 <= i0 and i0 + size <= self.grid.nx and 0 <= j0 and j0 + size <= self.grid.ny):
            raise ValueError(f"block at ({i0},{j0}) size {size} exceeds the grid")
        eps = np.array(self.eps)
        eps[i0:i0 + size, j0:j0 + size] = value
        return PermittivityGrid(self.grid, eps)


@dataclass(frozen=True)
class DipoleSpec:
    """A point dipole: position (um), in-plane unit orientation, angular frequency."""

    position: tuple[float, float]
    orientation: tuple[float, float]
    omega: float

    def __post_init__(self):
        norm = math.hypot(*self.orientation)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"orientation must be a unit vector, |d| = {norm}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def pos(self) -> np.ndarray:
        return np.array(self.position)

    @property
    def ori(self) -> np.ndarray:
        return np.array(self.orientation)


@dataclass(frozen=True)
class LevelSetOptions:
    """Parameters of the boundary-evolution (level-set) loop."""

    seed_center: tuple[float, float] = (0.0, 0.0)
    seed_radius: float = 1.0
    steps: int = 10
    cfl: float = 0.5
    reinit_every: int = 5
    band_halfwidth_cells: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description; every solver/optimizer input lives here."""

    grid: Grid2D
    donor: DipoleSpec
    acceptor: DipoleSpec
    block_size: int
    exclusion_radius: float
    alpha_n: float
    eps_inclusion: float
    max_iterations: int
    solver: "SolverParams"  # noqa: F821 - defined in retopt.solver
    scheme: str = "additive"
    snapshot_every: int = 25
    out_dir: str = "runs/out"
    levelset: LevelSetOptions = field(default_factory=LevelSetOptions)

    def __post_init__(self):
        if self.exclusion_radius < 0:
            raise ConfigError(f"inclusion.exclusion_radius must be >= 0, got {self.exclusion_radius}")
        if self.block_size < 1:
            raise ConfigError(f"inclusion.block_size must be >= 1, got {self.block_size}")
        if self.eps_inclusion <= 1.0:
            raise ConfigError(f"inclusion.eps_inclusion must be > 1, got {self.eps_inclusion}")
        if self.alpha_n <= 0:
            raise ConfigError(f"inclusion.alpha_n must be > 0, got {self.alpha_n}")
        if self.max_iterations < 0:
            raise ConfigError(f"optimize.max_iterations must be >= 0, got {self.max_iterations}")
        if self.scheme not in ("additive", "levelset"):
            raise ConfigError(f"optimize.scheme must be 'additive' or 'levelset', got {self.scheme!r}")
        for name, dip in (("donor", self.donor), ("acceptor", self.acceptor)):
            if not self._inside_interior(dip.position):
                raise ConfigError(f"{name}.position {dip.position} lies in or too close to the absorbing boundary")

    def _inside_interior(self, p) -> bool:
        margin = self.solver.pml_cells + INTERIOR_GUARD_CELLS
        try:
            i, j = self.grid.world_to_index(p)
        except ValueError:
            return False
        return (margin <= i < self.grid.nx - margin) and (margin <= j < self.grid.ny - margin)


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required key '{where}.{key}'" if where else f"missing required key '{key}'")
    return section[key]


def _dipole_from_section(section: dict, name: str, default_omega: float | None) -> DipoleSpec:
    pos = _require(section, "position", name)
    ori = _require(section, "orientation", name)
    if "omega" in section:
        omega = float(section["omega"])
    elif "wavelength" in section:
        omega = omega_from_wavelength(float(section["wavelength"]))
    elif default_omega is not None:
        omega = default_omega
    else:
        raise ConfigError(f"no frequency for '{name}': set top-level 'wavelength' or '{name}.omega'")
    try:
        return DipoleSpec(tuple(float(v) for v in pos), tuple(float(v) for v in ori), omega)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration document."""
    from .solver import SolverParams  # deferred: solver imports core types

    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")

    gsec = _require(doc, "grid", "")
    nx = int(_require(gsec, "nx", "grid"))
    ny = int(_require(gsec, "ny", "grid"))
    dx = float(_require(gsec, "dx", "grid"))
    try:
        if "origin" in gsec:
            grid = Grid2D(nx, ny, dx, tuple(float(v) for v in gsec["origin"]))
        else:
            grid = Grid2D.centered(nx, ny, dx)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc

    default_omega = None
    if "wavelength" in doc:
        default_omega = omega_from_wavelength(float(doc["wavelength"]))
    elif "omega" in doc:
        default_omega = float(doc["omega"])

    donor = _dipole_from_section(_require(doc, "donor", ""), "donor", default_omega)
    acceptor = _dipole_from_section(_require(doc, "acceptor", ""), "acceptor", default_omega)

    isec = doc.get("inclusion", {})
    ssec = doc.get("solver", {})
    osec = doc.get("optimize", {})
    lsec = osec.get("levelset", {})
    outsec = doc.get("output", {})

    try:
        solver = SolverParams(**{k: v for k, v in ssec.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc

    try:
        levelset = LevelSetOptions(
            seed_center=tuple(float(v) for v in lsec.get("seed_center", (0.0, 0.0))),
            seed_radius=float(lsec.get("seed_radius", 1.0)),
            steps=int(lsec.get("steps", 10)),
            cfl=float(lsec.get("cfl", 0.5)),
            reinit_every=int(lsec.get("reinit_every", 5)),
        )
        return RunConfig(
            grid=grid,
            donor=donor,
            acceptor=acceptor,
            block_size=int(isec.get("block_size", 2)),
            exclusion_radius=float(isec.get("exclusion_radius", 1.0)),
            alpha_n=float(isec.get("alpha_n", 1.0)),
            eps_inclusion=float(isec.get("eps_inclusion", 12.0)),
            max_iterations=int(osec.get("max_iterations", 250)),
            solver=solver,
            scheme=str(osec.get("scheme", "additive")),
            snapshot_every=int(osec.get("snapshot_every", 25)),
            out_dir=str(outsec.get("dir", "runs/out")),
            levelset=levelset,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path) -> RunConfig:
    with open(path, "r") as fh:
        return load_config(fh.read())


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-dict form of a RunConfig; load_config(yaml.dump(...)) round-trips.
    Values are coerced to plain Python scalars so yaml.safe_dump accepts them
    even when positions arrive as numpy floats."""
    from dataclasses import asdict

    def floats(seq):
        return [float(v) for v in seq]

    return {
        "grid": {"nx": cfg.grid.nx, "ny": cfg.grid.ny, "dx": float(cfg.grid.dx),
                 "origin": floats(cfg.grid.origin)},
        "donor": {"position": floats(cfg.donor.position),
                  "orientation": floats(cfg.donor.orientation),
                  "omega": float(cfg.donor.omega)},
        "acceptor": {"position": floats(cfg.acceptor.position),
                     "orientation": floats(cfg.acceptor.orientation),
                     "omega": float(cfg.acceptor.omega)},
        "inclusion": {"block_size": cfg.block_size,
                      "exclusion_radius": float(cfg.exclusion_radius),
                      "alpha_n": float(cfg.alpha_n),
                      "eps_inclusion": float(cfg.eps_inclusion)},
        "solver": {k: (float(v) if isinstance(v, float) else v)
                   for k, v in asdict(cfg.solver).items()},
        "optimize": {"max_iterations": cfg.max_iterations, "scheme": cfg.scheme,
                     "snapshot_every": cfg.snapshot_every,
                     "levelset": {"seed_center": floats(cfg.levelset.seed_center),
                                  "seed_radius": float(cfg.levelset.seed_radius),
                                  "steps": cfg.levelset.steps,
                                  "cfl": float(cfg.levelset.cfl),
                                  "reinit_every": cfg.levelset.reinit_every}},
        "output": {"dir": cfg.out_dir},
    }


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def rescaled(cfg: RunConfig, scale: float) -> RunConfig:
    """The same physical problem with all lengths scaled by ``scale`` and
    frequencies by 1/scale; reported ratios must be invariant under this."""
    grid = Grid2D(cfg.grid.nx, cfg.grid.ny, cfg.grid.dx * scale,
                  (cfg.grid.origin[0] * scale, cfg.grid.origin[1] * scale))

    def scale_dipole(d: DipoleSpec) -> DipoleSpec:
        return DipoleSpec((d.position[0] * scale, d.position[1] * scale),
                          d.orientation, d.omega / scale)

    return replace(cfg, grid=grid, donor=scale_dipole(cfg.donor),
                   acceptor=scale_dipole(cfg.acceptor),
                   exclusion_radius=cfg.exclusion_radius * scale)
