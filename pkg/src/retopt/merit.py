"""Merit functionals and first-order perturbation maps.

The energy-transfer rate between donor and acceptor, its Purcell factor, and
the per-cell predicted merit change for a small dielectric inclusion. The
perturbation maps need only the two solved fields (source at the donor and
source at the acceptor): by reciprocity the field of a source at r doubles as
the transposed propagator from r, so the predicted change of the merit is
known at every candidate cell from two runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import HBAR, INTERIOR_GUARD_CELLS, MU0, DipoleSpec, Grid2D, PermittivityGrid
from .solver import GreensField, SolverParams, probe, solve_green_column


@dataclass(eq=False)
class DeltaFMap:
    """Predicted merit change per unit inclusion strength at each candidate cell.

    ``values`` is NaN on ineligible cells; ``mask`` is True where a value is
    meaningful. The positive physical prefactor (polarisability, number
    density, block area, frequency powers) is omitted throughout: it cannot
    change where the maximum sits.
    """

    grid: Grid2D
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if np.any(~np.isfinite(self.values[self.mask])):
            raise ValueError("delta-F map has non-finite values on eligible cells")
        self.values.setflags(write=False)
        self.mask.setflags(write=False)

    def argmax(self) -> tuple[int, int]:
        """Eligible cell with the largest predicted gain; ties resolve to the
        lowest row-major index (np.nanargmax returns the first maximum)."""
        if not self.mask.any():
            raise ValueError("no eligible cells in the delta-F map")
        flat = int(np.nanargmax(np.where(self.mask, self.values, -np.inf)))
        return np.unravel_index(flat, self.values.shape)

    def best_value(self) -> float:
        return float(self.values[self.argmax()])


def _check_same_omega(a: float, b: float):
    if abs(a - b) > 1e-12 * max(a, b):
        raise ValueError(f"frequency mismatch: {a} vs {b}")


def ret_rate(field_d: GreensField, acceptor: DipoleSpec) -> float:
    """Energy-transfer rate Gamma from a solved donor field.

    Gamma = (2 pi mu0^2 w^4 / hbar) |d_A . G(r_A, r_D, w) . d_D|^2, with the
    contraction read off the calibrated field at the acceptor position.
    """
    _check_same_omega(field_d.omega, acceptor.omega)
    amp = probe(field_d, acceptor.position, acceptor.orientation)
    w = field_d.omega
    pref = 2.0 * math.pi * MU0 ** 2 * w ** 4 / HBAR
    return pref * abs(amp / (MU0 * w ** 2)) ** 2


def purcell_factor(eps: PermittivityGrid, donor: DipoleSpec, acceptor: DipoleSpec,
                   params: SolverParams) -> float:
    """Gamma / Gamma_0: the rate in ``eps`` over the rate in vacuum at identical
    discretization, so grid bias cancels in the ratio."""
    field = solve_green_column(eps, donor, params)
    field0 = solve_green_column(PermittivityGrid.vacuum(eps.grid), donor, params)
    return ret_rate(field, acceptor) / ret_rate(field0, acceptor)


def eligibility_mask(grid: Grid2D, donor: DipoleSpec, acceptor: DipoleSpec,
                     exclusion_radius: float, pml_cells: int,
                     filled: np.ndarray | None = None) -> np.ndarray:
    """Candidate-cell mask: outside both exclusion disks, clear of the absorber
    (plus guard), and not already filled."""
    margin = pml_cells + INTERIOR_GUARD_CELLS
    mask = np.zeros(grid.shape, dtype=bool)
    mask[margin:grid.nx - margin, margin:grid.ny - margin] = True
    xx, yy = grid.meshgrid()
    for atom in (donor, acceptor):
        dist2 = (xx - atom.position[0]) ** 2 + (yy - atom.position[1]) ** 2
        mask &= dist2 >= exclusion_radius ** 2
    if filled is not None:
        mask &= ~filled
    return mask


def ret_delta_integrand(field_d: GreensField, field_a: GreensField,
                        acceptor: DipoleSpec) -> np.ndarray:
    """Unmasked per-cell integrand of the energy-transfer merit change:
    Re{ conj(d_A.G(r_A,r_D).d_D) * [G(s,r_A).d_A] . [G(s,r_D).d_D] }
    with the unconjugated 2-vector contraction between the two field legs."""
    _check_same_omega(field_d.omega, field_a.omega)
    c_ad = probe(field_d, acceptor.position, acceptor.orientation)
    leg = field_a.ex * field_d.ex + field_a.ey * field_d.ey
    return np.real(np.conj(c_ad) * leg)


def ret_delta_map(field_d: GreensField, field_a: GreensField, donor: DipoleSpec,
                  acceptor: DipoleSpec, mask: np.ndarray) -> DeltaFMap:
    """Predicted energy-transfer merit change for a point inclusion at each
    eligible cell, up to the positive prefactor 4 pi alpha n mu0^3 w^4 / hbar."""
    if not mask.any():
        raise ValueError("eligibility mask excludes every cell")
    integrand = ret_delta_integrand(field_d, field_a, acceptor)
    values = np.where(mask, integrand, np.nan)
    return DeltaFMap(field_d.grid, values, np.array(mask))


def decay_delta_map(field_a: GreensField, atom: DipoleSpec, mask: np.ndarray) -> DeltaFMap:
    """Predicted spontaneous-decay merit change, Im{[G(s,r_A).d_A].[G(s,r_A).d_A]}
    (unconjugated self-contraction), up to 2 mu0^2 alpha n w^4 / hbar.

    The coincidence-limit self-field at the atom never enters: the map is
    evaluated at candidate cells s != r_A, and rate changes are verified by
    re-simulation against a vacuum-subtracted scattered field.
    """
    _check_same_omega(field_a.omega, atom.omega)
    if not mask.any():
        raise ValueError("eligibility mask excludes every cell")
    leg = field_a.ex * field_a.ex + field_a.ey * field_a.ey
    values = np.where(mask, np.imag(leg), np.nan)
    return DeltaFMap(field_a.grid, values, np.array(mask))


def decay_merit_scattered(eps: PermittivityGrid, atom: DipoleSpec,
                          params: SolverParams) -> float:
    """Environment-induced part of the decay merit, Im{d_A . G_scat(r_A, r_A) . d_A},
    with the singular vacuum self-term removed by subtracting an all-vacuum run
    at identical discretization."""
    field = solve_green_column(eps, atom, params)
    field0 = solve_green_column(PermittivityGrid.vacuum(eps.grid), atom, params)
    amp = probe(field, atom.position, atom.orientation)
    amp0 = probe(field0, atom.position, atom.orientation)
    w = atom.omega
    return float(np.imag((amp - amp0) / (MU0 * w ** 2)))
