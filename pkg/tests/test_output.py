"""Artifact writers: format, orientation, and byte determinism."""

import numpy as np

from retopt.core import Grid2D
from retopt.output import write_csv, write_grid_csv, write_pgm


def test_pgm_format_and_orientation(tmp_path):
    a = np.zeros((3, 2))
    a[2, 1] = 10.0  # brightest at max x, max y
    p = tmp_path / "img.pgm"
    write_pgm(p, a)
    lines = p.read_text().splitlines()
    assert lines[0] == "P2"
    assert lines[1] == "3 2"
    assert lines[2] == "255"
    rows = [list(map(int, ln.split())) for ln in lines[3:]]
    assert rows[0][2] == 255  # top image row = max y; last column = max x
    assert rows[1][0] == 0


def test_pgm_handles_nan(tmp_path):
    a = np.array([[np.nan, 1.0], [0.5, 0.0]])
    p = tmp_path / "img.pgm"
    write_pgm(p, a)
    assert "P2" in p.read_text()


def test_csv_bytes_deterministic(tmp_path):
    rows = [(1, 0.1 + 0.2, -3.4e-17), (2, 1.0 / 3.0, 7)]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(p1, ["i", "x", "y"], rows)
    write_csv(p2, ["i", "x", "y"], rows)
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert "0.30000000000000004" in text  # full 17-digit round-trip precision


def test_grid_csv_has_world_coordinates(tmp_path):
    grid = Grid2D(16, 16, 0.5, (0.0, 0.0))
    data = np.arange(256, dtype=float).reshape(16, 16)
    p = tmp_path / "g.csv"
    write_grid_csv(p, grid, data, "value")
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "i,j,x_um,y_um,value"
    assert len(lines) == 257
