"""CSV output writers, run sinks and post-hoc readers.

All floating-point fields are written with repr (shortest round-trip
representation, up to 17 significant digits), so equal runs produce
byte-identical files.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import DiagnosticsRecord, StructureReport

TIMESERIES_COLUMNS = ("t_s", "species", "e_tot_j", "e_sec_j", "e_int_j",
                      "e_micro_j", "t_sec_k", "gamma", "n_crystallized")
SNAPSHOT_COLUMNS = ("t_s", "id", "species", "x_m", "y_m", "z_m",
                    "vx_mps", "vy_mps", "vz_mps", "xavg_m", "yavg_m", "zavg_m")


class OutputError(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


class TimeseriesWriter:
    """Appends one row per species per diagnostics record to timeseries.csv."""

    def __init__(self, directory):
        self.path = Path(directory) / "timeseries.csv"
        try:
            self._fh = open(self.path, "w", newline="")
        except OSError as exc:
            raise OutputError(f"cannot open {self.path}: {exc}") from None
        self._fh.write(",".join(TIMESERIES_COLUMNS) + "\n")

    def on_record(self, record: DiagnosticsRecord):
        for e in record.per_species:
            self._fh.write(",".join((
                _fmt(record.time), e.species, _fmt(e.e_kin_total),
                _fmt(e.e_kin_secular), _fmt(e.e_interaction),
                _fmt(e.e_micromotion), _fmt(e.t_secular), _fmt(e.gamma),
                str(e.n_crystallized))) + "\n")

    def close(self):
        self._fh.close()


class SnapshotWriter:
    """Writes snapshot_<period>.csv files with per-particle state and the
    current window-averaged (secular) positions."""

    def __init__(self, directory):
        self.directory = Path(directory) / "snapshots"
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create {self.directory}: {exc}") from None

    def on_snapshot(self, period: int, state, species_names, mean_positions=None):
        avg = state.positions if mean_positions is None else mean_positions
        # negative period marks the last-good snapshot flushed on abort
        name = "snapshot_abort.csv" if period < 0 else f"snapshot_{period:08d}.csv"
        path = self.directory / name
        try:
            with open(path, "w", newline="") as fh:
                fh.write(",".join(SNAPSHOT_COLUMNS) + "\n")
                for i in range(state.n_particles):
                    p = state.positions[i]
                    v = state.velocities[i]
                    a = avg[i]
                    fh.write(",".join((
                        _fmt(state.time), str(i),
                        species_names[state.species_index[i]],
                        _fmt(p[0]), _fmt(p[1]), _fmt(p[2]),
                        _fmt(v[0]), _fmt(v[1]), _fmt(v[2]),
                        _fmt(a[0]), _fmt(a[1]), _fmt(a[2]))) + "\n")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from None

    def close(self):
        pass


class MemorySink:
    """Keeps records/snapshots in memory (tests and post-processing)."""

    def __init__(self):
        self.records: list[DiagnosticsRecord] = []
        self.snapshots: list[tuple[int, np.ndarray, np.ndarray]] = []
        self.structure: StructureReport | None = None

    def on_record(self, record):
        self.records.append(record)

    def on_snapshot(self, period, state, species_names, mean_positions=None):
        avg = state.positions if mean_positions is None else mean_positions
        self.snapshots.append((period, state.positions.copy(), avg.copy()))

    def on_structure(self, report):
        self.structure = report

    def close(self):
        pass


# --------------------------------------------------------------- readers

def read_timeseries(path):
    """timeseries.csv -> {species: dict of column arrays}."""
    path = Path(path)
    if not path.exists():
        raise OutputError(f"missing {path}")
    per_species: dict[str, dict[str, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TIMESERIES_COLUMNS:
            raise OutputError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            d = per_species.setdefault(row["species"],
                                       {c: [] for c in TIMESERIES_COLUMNS
                                        if c != "species"})
            for c in d:
                d[c].append(float(row[c]))
    return {sp: {c: np.asarray(v) for c, v in cols.items()}
            for sp, cols in per_species.items()}


@dataclass
class Snapshot:
    time: float
    ids: np.ndarray
    species: list[str]
    positions: np.ndarray
    velocities: np.ndarray
    mean_positions: np.ndarray


def read_snapshot(path) -> Snapshot:
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SNAPSHOT_COLUMNS:
            raise OutputError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = list(reader)
    if not rows:
        raise OutputError(f"{path}: empty snapshot")
    ids = np.array([int(r["id"]) for r in rows])
    species = [r["species"] for r in rows]
    pos = np.array([[float(r[c]) for c in ("x_m", "y_m", "z_m")] for r in rows])
    vel = np.array([[float(r[c]) for c in ("vx_mps", "vy_mps", "vz_mps")] for r in rows])
    avg = np.array([[float(r[c]) for c in ("xavg_m", "yavg_m", "zavg_m")] for r in rows])
    return Snapshot(float(rows[0]["t_s"]), ids, species, pos, vel, avg)


def list_snapshots(run_directory) -> list[Path]:
    d = Path(run_directory) / "snapshots"
    if not d.is_dir():
        return []
    return sorted(d.glob("snapshot_*.csv"))


def emit_plot_data(run_directory):
    """Per-species energy-vs-time files and x-z / x-y projections of the
    final time-averaged positions, next to the raw outputs."""
    run_directory = Path(run_directory)
    plots = run_directory / "plot_data"
    plots.mkdir(parents=True, exist_ok=True)
    series = read_timeseries(run_directory / "timeseries.csv")
    written = []
    for sp, cols in series.items():
        safe = "".join(ch if ch.isalnum() or ch in "+-" else "_" for ch in sp)
        path = plots / f"energy_{safe}.csv"
        with open(path, "w", newline="") as fh:
            fh.write("t_s,e_tot_j,e_sec_j,e_int_j,e_micro_j\n")
            for i in range(cols["t_s"].size):
                fh.write(",".join(_fmt(cols[c][i]) for c in
                                  ("t_s", "e_tot_j", "e_sec_j", "e_int_j",
                                   "e_micro_j")) + "\n")
        written.append(path)
    snaps = list_snapshots(run_directory)
    if snaps:
        snap = read_snapshot(snaps[-1])
        for fname, (i1, i2) in (("projection_xz.csv", (2, 0)),
                                ("projection_xy.csv", (0, 1))):
            path = plots / fname
            with open(path, "w", newline="") as fh:
                axes = {0: "x_m", 1: "y_m", 2: "z_m"}
                fh.write(f"species,{axes[i1]},{axes[i2]}\n")
                for j in range(len(snap.species)):
                    fh.write(f"{snap.species[j]},{_fmt(snap.mean_positions[j, i1])},"
                             f"{_fmt(snap.mean_positions[j, i2])}\n")
            written.append(path)
    return written
