import math
from pathlib import Path

import numpy as np
import pytest

from sympmd.cli import main
from sympmd.integrator import run
from sympmd.output import (MemorySink, SnapshotWriter, TimeseriesWriter,
                           emit_plot_data, list_snapshots, read_snapshot,
                           read_timeseries)
from sympmd.scenario import DiagnosticsConfig, InitConfig, preset


def _quick(duration=60, snapshot_every=20, seed=3):
    cfg = preset("fig1")
    return cfg.with_overrides(
        duration=duration, seed=seed,
        diagnostics=DiagnosticsConfig(snapshot_every=snapshot_every))


# ----------------------------------------------------------------- writers

def test_zero_duration_run_one_row_per_species(tmp_path):
    cfg = _quick(duration=0)
    ts = TimeseriesWriter(tmp_path)
    run(cfg, [ts])
    lines = (tmp_path / "timeseries.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 2  # header + one row per species
    assert lines[0].startswith("t_s,species,")


def test_snapshot_row_count(tmp_path):
    cfg = _quick(duration=5, snapshot_every=5)
    run(cfg, [SnapshotWriter(tmp_path)])
    snaps = list_snapshots(tmp_path)
    assert snaps
    text = snaps[-1].read_text().strip().splitlines()
    assert len(text) == 1 + 25


def test_timeseries_read_back(tmp_path):
    cfg = _quick(duration=8, snapshot_every=0)
    run(cfg, [TimeseriesWriter(tmp_path)])
    series = read_timeseries(tmp_path / "timeseries.csv")
    assert set(series) == {"Be+", "HD+"}
    assert series["Be+"]["t_s"].size == 9  # period-0 record + 8 periods
    assert np.all(np.diff(series["Be+"]["t_s"]) > 0)


def test_memory_sink_record_energies_consistent(tmp_path):
    cfg = _quick(duration=6)
    sink = MemorySink()
    run(cfg, [sink])
    for rec in sink.records:
        for e in rec.per_species:
            assert e.e_kin_secular <= e.e_kin_total * (1 + 1e-9)
            assert e.e_interaction >= 0.0


def test_emit_plot_data(tmp_path):
    cfg = _quick(duration=10, snapshot_every=5)
    run(cfg, [TimeseriesWriter(tmp_path), SnapshotWriter(tmp_path)])
    written = emit_plot_data(tmp_path)
    names = {p.name for p in written}
    assert "projection_xz.csv" in names and "projection_xy.csv" in names
    assert any(n.startswith("energy_") for n in names)
    proj = (tmp_path / "plot_data" / "projection_xz.csv").read_text().splitlines()
    assert len(proj) == 1 + 25


# --------------------------------------------------------------------- cli

def test_cli_run_smoke(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--preset", "fig1", "--duration", "60", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    assert (out / "timeseries.csv").exists()
    assert list_snapshots(out)
    assert (out / "scenario.txt").exists()


def test_cli_run_determinism_byte_identical(tmp_path):
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert main(["run", "--preset", "fig1", "--duration", "50",
                     "--seed", "11", "--out", str(out)]) == 0
        outs.append((out / "timeseries.csv").read_bytes())
    assert outs[0] == outs[1]


def test_cli_stability_fig_presets(capsys):
    assert main(["stability", "--preset", "fig1"]) == 0
    got = capsys.readouterr().out
    assert "0.13" in got and "0.39" in got
    assert main(["stability", "--preset", "fig2b"]) == 0
    got = capsys.readouterr().out
    assert "0.33" in got and "0.045" in got


def test_cli_stability_unstable_exit_3(tmp_path, capsys):
    # 1 amu at the fig1 drive sits beyond the q = 0.9 boundary
    text = """
[trap]
omega_rf_mhz = 8.5
rf_gradient_v_per_mm2 = 17.6
dc_gradient_v_per_cm2 = 30.0

[species.H+]
mass_amu = 1.007
charge_e = 1
count = 2
"""
    path = tmp_path / "unstable.txt"
    path.write_text(text)
    assert main(["stability", "--scenario", str(path)]) == 3
    assert "UNSTABLE" in capsys.readouterr().out


def test_cli_run_unstable_gate_exit_1(tmp_path, capsys):
    text = """
[trap]
omega_rf_mhz = 8.5
rf_gradient_v_per_mm2 = 17.6
dc_gradient_v_per_cm2 = 30.0

[species.H+]
mass_amu = 1.007
charge_e = 1
count = 2

[run]
duration_rf_periods = 5
"""
    path = tmp_path / "unstable.txt"
    path.write_text(text)
    code = main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert "unstable" in err.lower()
    # --force runs it anyway
    code = main(["run", "--scenario", str(path), "--force",
                 "--out", str(tmp_path / "o2")])
    assert code == 0


def test_cli_run_bad_scenario_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("[trap]\nomega_rf_mhz = -1\n")
    assert main(["run", "--scenario", str(path),
                 "--out", str(tmp_path / "o")]) == 1


def test_cli_analyze_roundtrip_and_idempotence(tmp_path, capsys):
    from sympmd.scenario import render_scenario
    cfg = _quick(duration=80, snapshot_every=20, seed=5)
    path = tmp_path / "quick.txt"
    path.write_text(render_scenario(cfg))
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(path), "--out", str(out),
                 "--verbose"]) == 0
    assert main(["analyze", str(out)]) == 0
    first = {p.name: p.read_bytes()
             for p in (out / "plot_data").glob("*.csv")}
    assert main(["analyze", str(out)]) == 0
    second = {p.name: p.read_bytes()
              for p in (out / "plot_data").glob("*.csv")}
    assert first == second


def test_cli_analyze_empty_dir_exit_1(tmp_path, capsys):
    assert main(["analyze", str(tmp_path)]) == 1


def test_cli_preset_export_parses_back(capsys):
    from sympmd.scenario import parse_scenario
    assert main(["preset", "fig2c"]) == 0
    text = capsys.readouterr().out
    assert parse_scenario(text) == preset("fig2c")


def test_cli_preset_unknown_name(capsys):
    assert main(["preset", "nope"]) == 1
    assert "fig1" in capsys.readouterr().err


def test_cli_unknown_flag_is_error():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--preset", "fig1", "--bogus"])
    assert exc.value.code == 1


def test_cli_workers_same_output(tmp_path):
    outs = []
    for sub, workers in (("w1", "1"), ("w4", "4")):
        out = tmp_path / sub
        assert main(["run", "--preset", "fig1", "--duration", "30",
                     "--seed", "2", "--workers", workers,
                     "--out", str(out)]) == 0
        outs.append((out / "timeseries.csv").read_bytes())
    assert outs[0] == outs[1]
