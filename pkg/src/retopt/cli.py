"""Command-line entry point.

Subcommands: validate (numeric-vs-analytic sweep), baseline (hand-designed
geometry), optimize (greedy or level-set run), deltamap (single prediction
map dump). Exit codes: 0 success / criteria met, 1 criteria failed,
2 usage or config error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np
import yaml

from . import analytic2d, output, presets
from .core import ConfigError, DipoleSpec, PermittivityGrid, RunConfig, load_config
from .merit import eligibility_mask, purcell_factor, ret_delta_map, ret_rate
from .optimize import run_additive, run_levelset
from .solver import SolverError, solve_green_column, vacuum_calibration

EXIT_OK = 0
EXIT_CRITERIA_FAILED = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

NEAR_FIELD_CELLS = 4  # separations under this many cells are reported but not judged


def _load(config_path: str) -> tuple[RunConfig, dict]:
    with open(config_path, "r") as fh:
        text = fh.read()
    cfg = load_config(text)
    raw = yaml.safe_load(text)
    return cfg, raw


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=args.out)
    if getattr(args, "snapshot_every", None) is not None:
        cfg = replace(cfg, snapshot_every=args.snapshot_every)
    return cfg


def _sweep_separations(raw: dict, cfg: RunConfig) -> list[float]:
    vsec = (raw or {}).get("validate", {})
    dx = cfg.grid.dx
    if "separations" in vsec:
        seps = [float(s) for s in vsec["separations"]]
    else:
        start = float(vsec.get("min_separation", dx))
        stop = float(vsec.get("max_separation", 3.0))
        cells = range(max(int(round(start / dx)), 1), int(round(stop / dx)) + 1)
        seps = [c * dx for c in cells]
    return seps


def cmd_validate(args) -> int:
    cfg, raw = _load(args.config)
    cfg = _apply_overrides(cfg, args)
    seps = _sweep_separations(raw, cfg)
    if not seps:
        print("validate: empty separation sweep", file=sys.stderr)
        return EXIT_USAGE
    direction = np.array((raw or {}).get("validate", {}).get("direction", [1.0, 0.0]), dtype=float)
    direction /= np.hypot(*direction)
    tolerance = float((raw or {}).get("validate", {}).get("tolerance", 0.05))

    eps = PermittivityGrid.vacuum(cfg.grid)
    try:
        field = solve_green_column(eps, cfg.donor, cfg.solver)
    except SolverError as err:
        print(f"validate: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER

    rows = []
    first_fail = None
    for rho in seps:
        pos = cfg.donor.pos + rho * direction
        acceptor = DipoleSpec(tuple(pos), cfg.acceptor.orientation, cfg.donor.omega)
        numeric = ret_rate(field, acceptor)
        analytic = analytic2d.ret_rate_vacuum(acceptor, cfg.donor)
        rel = abs(numeric - analytic) / analytic
        counted = rho >= NEAR_FIELD_CELLS * cfg.grid.dx
        ok = rel <= tolerance
        rows.append((rho, numeric, analytic, rel, int(counted), int(ok)))
        if counted and not ok and first_fail is None:
            first_fail = (rho, rel)
    out_dir = cfg.out_dir
    output.write_csv(os.path.join(out_dir, "validation.csv"),
                     ["separation_um", "numeric_rate", "analytic_rate",
                      "relative_error", "counted", "within_tolerance"], rows)
    output.write_metadata(os.path.join(out_dir, "metadata.yaml"), cfg,
                          {"worst_counted_error": max((r[3] for r in rows if r[4]), default=None),
                           "tolerance": tolerance})
    counted_rows = [r for r in rows if r[4]]
    worst = max((r[3] for r in counted_rows), default=0.0)
    print(f"validate: {len(rows)} separations, worst counted error {worst:.4f} "
          f"(tolerance {tolerance})")
    if first_fail is not None:
        print(f"validate: FAILED first at separation {first_fail[0]:.4g} um "
              f"(relative error {first_fail[1]:.4f})", file=sys.stderr)
        return EXIT_CRITERIA_FAILED
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg, raw = _load(args.config)
    cfg = _apply_overrides(cfg, args)
    psec = dict((raw or {}).get("preset", {}))
    if args.preset:
        psec["kind"] = args.preset
    if "kind" not in psec:
        print("baseline: no preset given (use --preset or a 'preset:' config section)",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        spec = presets.from_config_dict(psec)
        design = presets.generate(spec, cfg.grid)
    except ValueError as err:
        print(f"baseline: {err}", file=sys.stderr)
        return EXIT_USAGE
    for name, dip in (("donor", cfg.donor), ("acceptor", cfg.acceptor)):
        i, j = cfg.grid.world_to_index(dip.position)
        if design.eps[i, j] != 1.0:
            print(f"baseline: {name} position is buried in preset material", file=sys.stderr)
            return EXIT_USAGE
    try:
        fp = purcell_factor(design, cfg.donor, cfg.acceptor, cfg.solver)
    except SolverError as err:
        print(f"baseline: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    out_dir = cfg.out_dir
    output.write_design(out_dir, spec.kind, design)
    output.write_csv(os.path.join(out_dir, f"baseline_{spec.kind}.csv"),
                     ["preset", "purcell"], [(spec.kind, fp)])
    output.write_metadata(os.path.join(out_dir, "metadata.yaml"), cfg,
                          {"preset": spec.kind, "purcell": fp})
    print(f"baseline {spec.kind}: F_p = {fp:.6g}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg, _ = _load(args.config)
    cfg = _apply_overrides(cfg, args)
    try:
        if cfg.scheme == "levelset":
            result = run_levelset(cfg)
            fp = result.history[-1].purcell
            print(f"optimize (levelset): {len(result.history) - 1} steps, final F_p = {fp:.6g}")
            return EXIT_OK
        state = run_additive(cfg, progress=_progress_printer(args))
    except SolverError as err:
        print(f"optimize: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    fp = state.history[-1].purcell if state.history else 1.0
    print(f"optimize: {state.iteration} iterations, final F_p = {fp:.6g}")
    if state.stop_reason and "solver failure" in state.stop_reason:
        print(f"optimize: {state.stop_reason}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _progress_printer(args):
    if not getattr(args, "verbose", False):
        return None

    def printer(state):
        h = state.history[-1]
        print(f"  it {h.iteration:4d}  cell {h.cell}  dF {h.delta_f:.4e}  F_p {h.purcell:.5g}")
    return printer


def cmd_deltamap(args) -> int:
    cfg, raw = _load(args.config)
    cfg = _apply_overrides(cfg, args)
    psec = (raw or {}).get("preset")
    design = (presets.generate(presets.from_config_dict(psec), cfg.grid)
              if psec else PermittivityGrid.vacuum(cfg.grid))
    try:
        cal = vacuum_calibration(cfg.grid, cfg.donor.omega, cfg.solver)
        field_d = solve_green_column(design, cfg.donor, cfg.solver, cal)
        field_a = solve_green_column(design, cfg.acceptor, cfg.solver, cal)
    except SolverError as err:
        print(f"deltamap: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    mask = eligibility_mask(cfg.grid, cfg.donor, cfg.acceptor, cfg.exclusion_radius,
                            cfg.solver.pml_cells)
    dmap = ret_delta_map(field_d, field_a, cfg.donor, cfg.acceptor, mask)
    out_dir = cfg.out_dir
    output.write_grid_csv(os.path.join(out_dir, "deltamap.csv"), cfg.grid,
                          np.where(dmap.mask, dmap.values, np.nan), "delta_f")
    output.write_pgm(os.path.join(out_dir, "deltamap.pgm"), dmap.values)
    output.write_metadata(os.path.join(out_dir, "metadata.yaml"), cfg,
                          {"argmax_cell": list(map(int, dmap.argmax())),
                           "best_delta_f": dmap.best_value()})
    cell = dmap.argmax()
    print(f"deltamap: argmax at cell {tuple(cell)} "
          f"(world {tuple(cfg.grid.index_to_world(*cell))}), value {dmap.best_value():.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retopt",
                                     description="Inverse design of dipole-dipole coupling "
                                                 "in 2D dielectric environments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, extra in (
            ("validate", cmd_validate, ()),
            ("baseline", cmd_baseline, ("preset",)),
            ("optimize", cmd_optimize, ("snapshot", "verbose")),
            ("deltamap", cmd_deltamap, ())):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", help="output directory (overrides config output.dir)")
        if "preset" in extra:
            p.add_argument("--preset", help="preset name: " + ", ".join(presets.KINDS))
        if "snapshot" in extra:
            p.add_argument("--snapshot-every", type=int, dest="snapshot_every",
                           help="design snapshot cadence in iterations")
        if "verbose" in extra:
            p.add_argument("--verbose", action="store_true", help="per-iteration progress")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
