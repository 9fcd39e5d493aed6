import numpy as np
import pytest

from retopt.core import DipoleSpec, Grid2D, PermittivityGrid, omega_from_wavelength
from retopt.solver import SolverParams

# One shared small scene for the solver-level tests: wavelength pi um at 8
# cells per wavelength keeps a solve around a tenth of a second while leaving
# room for probes out to a couple of wavelengths.
LAM = np.pi
OMEGA = omega_from_wavelength(LAM)
DX = LAM / 16


@pytest.fixture(scope="session")
def small_grid():
    return Grid2D.centered(101, 75, DX)


@pytest.fixture(scope="session")
def solver_params():
    return SolverParams()


@pytest.fixture(scope="session")
def vacuum(small_grid):
    return PermittivityGrid.vacuum(small_grid)


@pytest.fixture(scope="session")
def donor(small_grid):
    pos = small_grid.index_to_world(30, 37)
    return DipoleSpec(tuple(pos), (0.0, 1.0), OMEGA)
