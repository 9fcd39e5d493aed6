"""Run artifacts: CSV tables, textual grayscale images (PGM), metadata files.

Everything written here is plain text so results stay diffable and plottable
without extra tooling; floats are rendered with 17 significant digits so a
repeated run produces byte-identical files.
"""

from __future__ import annotations

import csv
import os

import numpy as np
import yaml

from .core import RunConfig, config_to_dict


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_csv(path, header, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_pgm(path, data: np.ndarray, lo: float | None = None, hi: float | None = None):
    """Textual portable graymap of a 2D array, linearly mapped to 0..255.

    Rows run from the top of the image downward, i.e. decreasing y; columns
    follow x. NaNs render as 0.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    a = np.array(data, dtype=float)
    finite = a[np.isfinite(a)]
    lo = float(finite.min()) if lo is None and finite.size else (lo or 0.0)
    hi = float(finite.max()) if hi is None and finite.size else (hi or 1.0)
    span = hi - lo if hi > lo else 1.0
    pix = np.clip((a - lo) / span * 255.0, 0.0, 255.0)
    pix = np.where(np.isfinite(pix), pix, 0.0).astype(int)
    nx, ny = a.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{nx} {ny}\n255\n")
        for j in range(ny - 1, -1, -1):
            fh.write(" ".join(str(int(pix[i, j])) for i in range(nx)) + "\n")


def write_grid_csv(path, grid, data: np.ndarray, value_name: str):
    rows = ((i, j, grid.origin[0] + i * grid.dx, grid.origin[1] + j * grid.dx, float(data[i, j]))
            for i in range(grid.nx) for j in range(grid.ny))
    write_csv(path, ["i", "j", "x_um", "y_um", value_name], rows)


def write_design(out_dir, tag: str, eps_grid):
    """Permittivity snapshot as CSV grid plus a quick-look PGM."""
    write_grid_csv(os.path.join(out_dir, f"design_{tag}.csv"), eps_grid.grid, eps_grid.eps, "eps")
    write_pgm(os.path.join(out_dir, f"design_{tag}.pgm"), eps_grid.eps, lo=1.0)


def write_history(path, history):
    write_csv(path, ["iteration", "cell_i", "cell_j", "delta_f", "gamma", "purcell"],
              ((h.iteration, h.cell[0], h.cell[1], h.delta_f, h.gamma, h.purcell)
               for h in history))


def _plain(value):
    """Recursively coerce numpy scalars/arrays so yaml.safe_dump accepts them."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_metadata(path, cfg: RunConfig, extra: dict | None = None):
    """Full resolved configuration plus run results; enough to re-run bit-identically."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    doc = {"config": config_to_dict(cfg)}
    if extra:
        doc["result"] = _plain(extra)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
