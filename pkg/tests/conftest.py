"""Session-scoped scenario runs shared by the acceptance tests.

The structure-formation runs take minutes each; they are produced once,
written to a session-scoped directory (snapshots included) and reused by
every criterion that inspects them.
"""
from dataclasses import replace

import pytest

from sympmd.integrator import run
from sympmd.model import PSEUDO_MODE, TrapConfig
from sympmd.output import MemorySink, SnapshotWriter, TimeseriesWriter
from sympmd.scenario import preset

# fig1 with the friction at the top of the published range (permitted to
# shorten the runs) and with the caption value for the mode comparison
FIG1_FAST_BETA = 8e-22
FIG1_FAST_DURATION = 8000
FIG1_CAPTION_DURATION = 12000
FIG2_DURATION = 36000


def _run(cfg, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    sink = MemorySink()
    final = run(cfg, [sink, TimeseriesWriter(out_dir), SnapshotWriter(out_dir)])
    return cfg, sink, final, out_dir


@pytest.fixture(scope="session")
def fig1_fast_run(tmp_path_factory):
    cfg = preset("fig1").with_overrides(duration=FIG1_FAST_DURATION)
    cfg = cfg.with_overrides(cooling=replace(cfg.cooling, beta=FIG1_FAST_BETA))
    return _run(cfg, tmp_path_factory.mktemp("fig1_fast"))


@pytest.fixture(scope="session")
def fig1_caption_rf_run(tmp_path_factory):
    cfg = preset("fig1").with_overrides(duration=FIG1_CAPTION_DURATION)
    return _run(cfg, tmp_path_factory.mktemp("fig1_rf"))


@pytest.fixture(scope="session")
def fig1_caption_pseudo_run(tmp_path_factory):
    cfg = preset("fig1").with_overrides(duration=FIG1_CAPTION_DURATION)
    t = cfg.trap
    cfg = cfg.with_overrides(trap=TrapConfig(t.omega_rf, t.rf_gradient,
                                             t.dc_gradient, PSEUDO_MODE))
    return _run(cfg, tmp_path_factory.mktemp("fig1_pseudo"))


@pytest.fixture(scope="session")
def fig2b_run(tmp_path_factory):
    cfg = preset("fig2b").with_overrides(duration=FIG2_DURATION)
    return _run(cfg, tmp_path_factory.mktemp("fig2b"))


@pytest.fixture(scope="session")
def fig2c_run(tmp_path_factory):
    cfg = preset("fig2c").with_overrides(duration=FIG2_DURATION)
    return _run(cfg, tmp_path_factory.mktemp("fig2c"))
