"""Command-line front end: run, stability, analyze, preset."""
from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import diagnostics as diag
from . import output as out
from .integrator import IntegrationError, UnstableScenarioError, run
from .model import ModelError, stability_report
from .scenario import (PRESET_NAMES, ScenarioError, parse_scenario, preset,
                       render_scenario)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_UNSTABLE = 3


def _add_scenario_source(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", metavar="PATH", help="scenario file to run")
    g.add_argument("--preset", metavar="NAME",
                   help="built-in scenario: " + ", ".join(PRESET_NAMES))


def _load_config(args):
    if args.preset:
        cfg = preset(args.preset)
    else:
        path = Path(args.scenario)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read {path}: {exc}") from None
        cfg = parse_scenario(text, name=path.stem)
    seed = getattr(args, "seed", None)
    duration = getattr(args, "duration", None)
    return cfg.with_overrides(seed=seed, duration=duration)


def _progress_printer(t_start, verbose):
    last = [t_start]

    def cb(period, total, record):
        now = time.monotonic()
        if now - last[0] < 2.0 and period != total and not (verbose and record):
            return
        if record is None and period != total:
            return
        last[0] = now
        msg = f"period {period}/{total}  wall {now - t_start:7.1f}s"
        if record is not None:
            for e in record.per_species:
                msg += f"  T_sec[{e.species}]={e.t_secular:.3e}K"
        print(msg, file=sys.stderr, flush=True)

    return cb


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except (ScenarioError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out) if args.out else (
        Path(cfg.output_dir) if cfg.output_dir else Path("sympmd-out") / cfg.name)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scenario.txt").write_text(render_scenario(cfg))
    sinks = [out.TimeseriesWriter(out_dir), out.SnapshotWriter(out_dir),
             _StructurePrinter()]
    progress = _progress_printer(time.monotonic(), args.verbose)
    try:
        run(cfg, sinks, workers=args.workers, allow_unstable=args.force,
            progress=progress)
    except UnstableScenarioError as exc:
        print(f"error: {exc}\n(use --force to run anyway)", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"numerical abort: {exc}\n(last-good snapshot flushed to "
              f"{out_dir / 'snapshots'})", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"output written to {out_dir}")
    return EXIT_OK


class _StructurePrinter:
    def on_structure(self, report):
        print("final structure:")
        for line in report.lines():
            print("  " + line)

    def close(self):
        pass


def cmd_stability(args) -> int:
    try:
        cfg = _load_config(args)
    except (ScenarioError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = stability_report(cfg.species_list, cfg.trap)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.all_stable else EXIT_UNSTABLE


def cmd_analyze(args) -> int:
    run_dir = Path(args.run_dir)
    snaps = out.list_snapshots(run_dir)
    if len(snaps) < 2:
        print(f"error: {run_dir} has {len(snaps)} snapshot(s); need at least 2 "
              "to build a trajectory window", file=sys.stderr)
        return EXIT_CONFIG
    try:
        snapshots = [out.read_snapshot(p) for p in snaps]
        times = np.array([s.time for s in snapshots])
        mean_positions = np.stack([s.mean_positions for s in snapshots])
        names_in_order = []
        for name in snapshots[-1].species:
            if name not in names_in_order:
                names_in_order.append(name)
        species_index = np.array([names_in_order.index(n)
                                  for n in snapshots[-1].species])
        window = diag.TrajectoryWindow(times, mean_positions)
        thresholds = replace(diag.StructureThresholds(),
                             min_window_periods=min(50, len(snapshots)))
        report = diag.classify_structure(
            window, species_index,
            [SimpleNamespace(name=n) for n in names_in_order], thresholds)
        for line in report.lines():
            print(line)
        written = out.emit_plot_data(run_dir)
    except (out.OutputError, ModelError, diag.WindowTooShortError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_preset(args) -> int:
    try:
        cfg = preset(args.name)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(render_scenario(cfg))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 1); exit 2 is reserved for
    # numerical aborts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="sympmd",
        description="Molecular dynamics of sympathetic cooling and "
                    "crystallization in a linear rf trap")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run a scenario")
    _add_scenario_source(pr)
    pr.add_argument("--out", metavar="DIR", help="output directory")
    pr.add_argument("--seed", type=int, help="override the scenario seed")
    pr.add_argument("--duration", type=int, metavar="N_RF_PERIODS",
                    help="override the run duration")
    pr.add_argument("--workers", type=int, default=1,
                    help="force-evaluation workers (results are identical)")
    pr.add_argument("--force", action="store_true",
                    help="run even if the stability gate fails")
    pr.add_argument("--verbose", action="store_true",
                    help="progress line for every diagnostics record")
    pr.set_defaults(func=cmd_run)

    ps = sub.add_parser("stability", help="print the stability report")
    _add_scenario_source(ps)
    ps.set_defaults(func=cmd_stability)

    pa = sub.add_parser("analyze", help="re-derive structure from stored snapshots")
    pa.add_argument("run_dir", help="directory written by 'sympmd run'")
    pa.set_defaults(func=cmd_analyze)

    pp = sub.add_parser("preset", help="print a built-in scenario file")
    pp.add_argument("name", help=", ".join(PRESET_NAMES))
    pp.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
