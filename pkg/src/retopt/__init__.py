"""Inverse design of dipole-dipole coupling in 2D dielectric environments.

Computes electromagnetic Green's-tensor columns on a permittivity grid with a
2D FDTD solver, predicts the first-order merit change of adding dielectric at
every candidate cell from just two solves, and iteratively reshapes the
environment (greedy block placement or level-set boundary evolution) to
maximize resonant energy transfer between two dipoles.
"""

from .core import (ConfigError, DipoleSpec, Grid2D, LevelSetOptions, PermittivityGrid,
                   RunConfig, load_config, load_config_file, omega_from_wavelength,
                   serialize_config)
from .solver import (ConvergenceError, GreensField, InstabilityError, SolverError,
                     SolverParams, probe, solve_green_column)
from .merit import DeltaFMap, purcell_factor, ret_delta_map, ret_rate
from .optimize import (LevelSetField, OptimizationState, additive_step, run_additive,
                       run_levelset)
from .presets import PresetSpec, generate

__version__ = "0.1.0"
