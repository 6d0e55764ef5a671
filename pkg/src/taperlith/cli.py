"""Command-line front end: litho, bpm, and sweep runs driven by a JSON config,
emitting deterministic CSVs and binary field snapshots."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

from . import analysis, lithosim
from .config import ConfigError, RunConfig, load_config
from .fielddump import write_field_dump

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _fmt(value) -> str:
    """Fixed-precision cell formatting: floats at 9 significant digits."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.9g}"
    return str(value)


class OutputTracker:
    """Collects files written by one run so failures can remove partial outputs."""

    def __init__(self, outdir: Path):
        self.outdir = outdir
        self.paths: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.outdir / name
        self.paths.append(p)
        return p

    def write_csv(self, name: str, columns, rows) -> Path:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
        return p

    def cleanup(self) -> None:
        for p in self.paths:
            try:
                p.unlink()
            except OSError:
                pass


def _write_effective_config(cfg: RunConfig, out: OutputTracker) -> None:
    out.path("effective_config.json").write_text(cfg.effective_json())


def cmd_litho(cfg: RunConfig, out: OutputTracker) -> int:
    """Print one exposure: height map, crest line, class + taper angle summary."""
    mask = cfg.mask()
    setup = cfg.exposure()
    grid = cfg.litho_grid()
    profile = lithosim.simulate_print(mask, setup, grid, dose_scale=cfg.dose_scale,
                                      strip=cfg.strip)
    cls = lithosim.classify_profile(profile, setup, edge_bound=mask.w_long)
    angle = lithosim.vertical_taper_angle(profile)

    x = grid.x
    header = ["y_um"] + [_fmt(float(v)) for v in x]
    rows = ([_fmt(float(yv))] + [_fmt(float(h)) for h in hrow]
            for yv, hrow in zip(grid.y, profile.h))
    p = out.path("height_map.csv")
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)

    crest = profile.h.max(axis=1)
    out.write_csv("crest_line.csv", ("y_um", "crest_height_um"),
                  [(float(yv), float(cv)) for yv, cv in zip(grid.y, crest)])
    out.write_csv("litho_summary.csv",
                  ("profile_class", "vertical_taper_angle_deg", "gap0_um", "tilt_deg"),
                  [(cls.value, angle, setup.gap0, setup.tilt_deg)])
    _write_effective_config(cfg, out)
    return EXIT_OK


def cmd_bpm(cfg: RunConfig, out: OutputTracker) -> int:
    """Propagate through the frustum: power trace, loss breakdown, field snapshots."""
    geom = cfg.frustum()
    grid = cfg.bpm_grid()
    chain = analysis.run_chain(
        cfg.source(grid), geom, cfg.fiber(), cfg.bpm_settings(), grid,
        snapshot_zs=cfg.snapshot_zs,
    )
    out.write_csv("power_vs_z.csv", ("z_um", "power_fraction"),
                  list(chain.propagation.power_vs_z))
    b = chain.breakdown
    out.write_csv("loss_breakdown.csv",
                  ("facet_db", "taper_db", "exit_db", "total_db"),
                  [(b.facet_db, b.taper_db, b.exit_db, b.total_db)])
    for z, field in chain.propagation.snapshots:
        write_field_dump(out.path(f"field_z{z:.2f}um.fld"), field, z)
    _write_effective_config(cfg, out)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: OutputTracker, jobs: int) -> int:
    """Run the configured tilt/gap and wavelength sweeps, one CSV each."""
    meta = {"config_hash": cfg.config_hash()}
    wrote_any = False
    all_failed = True

    if cfg.tilt_list and cfg.gap0_list:
        sweep = analysis.tilt_gap_sweep(
            cfg.tilt_list, cfg.gap0_list, cfg.sweep_mask(), cfg.exposure(),
            dose_scale=cfg.dose_scale,
            dx=cfg.data["litho_grid"]["dx_um"], dy=cfg.data["litho_grid"]["dy_um"],
            strip=cfg.strip, jobs=jobs, metadata=meta,
        )
        out.write_csv("tilt_gap.csv", sweep.columns, sweep.rows)
        wrote_any = True
        all_failed = all_failed and all(row[-1] for row in sweep.rows)

    if cfg.wavelength_list:
        sweep = analysis.wavelength_sweep(
            cfg.wavelength_list, cfg.frustum(), cfg.sweep_fiber(), cfg.bpm_settings(),
            cfg.bpm_grid(), metadata=meta,
        )
        out.write_csv("wavelength_loss.csv", sweep.columns, sweep.rows)
        wrote_any = True
        all_failed = all_failed and all(row[-1] for row in sweep.rows)

    if not wrote_any:
        raise ConfigError("sweep requires a non-empty tilt/gap grid or wavelength list")
    _write_effective_config(cfg, out)
    return EXIT_RUNTIME if all_failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taperlith",
        description="Proximity-print lithography and taper-coupling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("litho", "simulate one exposure and classify the developed ridge"),
        ("bpm", "propagate through the tapered guide and report coupling losses"),
        ("sweep", "run the configured parameter sweeps"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON run configuration (defaults used when omitted)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default TAPERLITH_OUT or ./taperlith_out)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes for sweep cells")
        p.add_argument("--seed", type=int, default=0,
                       help="reserved; all computation is deterministic")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.out is None:
        args.out = Path(os.environ.get("TAPERLITH_OUT", "taperlith_out"))
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"taperlith: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    args.out.mkdir(parents=True, exist_ok=True)
    out = OutputTracker(args.out)
    try:
        if args.command == "litho":
            return cmd_litho(cfg, out)
        if args.command == "bpm":
            return cmd_bpm(cfg, out)
        return cmd_sweep(cfg, out, jobs=max(1, args.jobs))
    except ConfigError as exc:
        out.cleanup()
        print(f"taperlith: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        out.cleanup()
        print(f"taperlith: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
