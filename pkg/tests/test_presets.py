"""Baseline geometry generators: rasterization sanity and bounds handling."""

import math

import numpy as np
import pytest

from retopt.core import Grid2D
from retopt.presets import DEFAULTS, KINDS, PresetSpec, from_config_dict, generate


@pytest.fixture
def grid():
    return Grid2D.centered(141, 141, 0.1)


def test_vacuum_validation_is_identity(grid):
    eps = generate(PresetSpec("vacuum_validation", permittivity=1.0), grid)
    assert np.all(eps.eps == 1.0)


def test_circle_rasterized_area(grid):
    R = 1.2  # 12 cells >= 10 cells
    eps = generate(PresetSpec("circle", radius=R), grid)
    area = np.sum(eps.eps > 1.0) * grid.dx ** 2
    assert area == pytest.approx(math.pi * R * R, rel=0.03)


def test_circle_material_value(grid):
    eps = generate(PresetSpec("circle", radius=1.0), grid)
    assert set(np.unique(eps.eps)) == {1.0, 12.0}


def test_ring_is_annulus(grid):
    eps = generate(PresetSpec("ring_resonator", inner_radius=1.0, outer_radius=1.5), grid)
    c = grid.world_to_index((0.0, 0.0))
    assert eps.eps[c] == 1.0                                  # bore stays empty
    assert eps.eps[grid.world_to_index((1.2, 0.0))] == 12.0   # wall
    assert eps.eps[grid.world_to_index((2.0, 0.0))] == 1.0    # outside


def test_half_wave_cavity_leaves_center_open(grid):
    eps = generate(PresetSpec("half_wave_cavity", cavity_length=1.6, wall_thickness=0.4,
                              cavity_height=4.0), grid)
    assert eps.eps[grid.world_to_index((0.0, 0.0))] == 1.0
    assert eps.eps[grid.world_to_index((1.0, 0.0))] == 12.0
    assert eps.eps[grid.world_to_index((1.0, 2.4))] == 1.0    # above the walls


def test_parabola_opens_toward_positive_x(grid):
    eps = generate(PresetSpec("parabola", focal_length=0.8, wall_thickness=0.4,
                              aperture=5.0), grid)
    assert eps.eps[grid.world_to_index((-1.0, 0.0))] == 12.0  # vertex shell behind focus
    assert eps.eps[grid.world_to_index((0.0, 0.0))] == 1.0    # focus in vacuum
    assert eps.eps[grid.world_to_index((2.0, 0.0))] == 1.0    # beam path clear


def test_geometry_reaching_grid_edge_rejected(grid):
    with pytest.raises(ValueError, match="edge"):
        generate(PresetSpec("circle", radius=8.0), grid)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="kind"):
        PresetSpec("moebius")


def test_defaults_cover_all_kinds():
    assert set(DEFAULTS) == set(KINDS)


def test_from_config_dict_overrides():
    spec = from_config_dict({"kind": "circle", "radius": 0.7, "center": [0.1, -0.2]})
    assert spec.radius == 0.7
    assert spec.center == (0.1, -0.2)
    assert spec.permittivity == 12.0
    with pytest.raises(ValueError):
        from_config_dict({"radius": 0.7})
