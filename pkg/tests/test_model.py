import math

import numpy as np
import pytest

from sympmd.model import (CONSTANTS, LASER_COOLED, ModelError,
                          RadialDefocusError, Species, TrapConfig, compute_q,
                          pseudopotential_energy, secular_frequencies,
                          stability_report)
from sympmd.scenario import preset

FIG1_TRAP = TrapConfig.from_drive(8.5, 17.6, 30.0)
FIG2_TRAP = TrapConfig.from_drive(1.6, 23.8, 12.0)

BE = Species.from_amu_e("Be+", 9.012, 1)
HD = Species.from_amu_e("HD+", 3.021, 1)
BA = Species.from_amu_e("Ba+", 136.91, 1)
MOL = Species.from_amu_e("mol", 20000.0, 20)


def test_compute_q_fig1_caption():
    assert compute_q(BE, FIG1_TRAP) == pytest.approx(0.13, abs=0.01)
    assert compute_q(HD, FIG1_TRAP) == pytest.approx(0.39, abs=0.01)


def test_compute_q_fig2_caption():
    assert compute_q(BA, FIG2_TRAP) == pytest.approx(0.33, abs=0.01)
    assert compute_q(MOL, FIG2_TRAP) == pytest.approx(0.045, abs=0.003)


def test_compute_q_zero_drive():
    trap = TrapConfig.from_drive(8.5, 0.0, 30.0)
    assert compute_q(BE, trap) == 0.0


def test_q_scaling_properties():
    q0 = compute_q(BE, FIG1_TRAP)
    double_grad = TrapConfig(FIG1_TRAP.omega_rf, 2 * FIG1_TRAP.rf_gradient,
                             FIG1_TRAP.dc_gradient)
    assert compute_q(BE, double_grad) == pytest.approx(2 * q0, rel=1e-12)
    # doubling both Q and m leaves q unchanged
    heavy = Species.from_amu_e("x", 2 * 9.012, 2)
    assert compute_q(heavy, FIG1_TRAP) == pytest.approx(q0, rel=1e-12)


def test_secular_frequencies_fig1():
    wr, wz = secular_frequencies(BE, FIG1_TRAP)
    assert wr / (2 * math.pi) == pytest.approx(340e3, rel=0.02)
    assert wz / (2 * math.pi) == pytest.approx(285e3, rel=0.02)


def test_secular_frequency_sqrt_qm_scaling():
    # omega_z scales as sqrt(Q/m): HD+ from the Be+ value
    _, wz_be = secular_frequencies(BE, FIG1_TRAP)
    _, wz_hd = secular_frequencies(HD, FIG1_TRAP)
    expected = wz_be * math.sqrt(BE.mass / HD.mass)
    assert wz_hd == pytest.approx(expected, rel=1e-12)
    assert wz_hd / (2 * math.pi) == pytest.approx(492e3, rel=0.01)


def test_secular_frequencies_no_axial_drive_limit():
    # dc_gradient must stay positive; approach zero and compare to q W / 2 sqrt2
    trap = TrapConfig(FIG1_TRAP.omega_rf, FIG1_TRAP.rf_gradient, 1e-6)
    wr, wz = secular_frequencies(BE, trap)
    q = compute_q(BE, trap)
    assert wz == pytest.approx(0.0, abs=10.0)  # rad/s; gradient ~1e-6 of fig1
    assert wr == pytest.approx(q * trap.omega_rf / (2 * math.sqrt(2)), rel=1e-6)


def test_secular_frequencies_radial_defocus():
    # huge dc gradient overwhelms the rf focusing
    trap = TrapConfig(FIG1_TRAP.omega_rf, FIG1_TRAP.rf_gradient, 1e8)
    with pytest.raises(RadialDefocusError):
        secular_frequencies(BE, trap)


def test_omega_z_independent_of_rf_gradient():
    _, wz1 = secular_frequencies(BE, TrapConfig.from_drive(8.5, 17.6, 30.0))
    _, wz2 = secular_frequencies(BE, TrapConfig.from_drive(8.5, 25.0, 30.0))
    assert wz1 == wz2


def test_omega_rho_monotone_in_dc_gradient():
    freqs = []
    for gdc in (10.0, 20.0, 30.0):
        wr, _ = secular_frequencies(BE, TrapConfig.from_drive(8.5, 17.6, gdc))
        freqs.append(wr)
    assert freqs[0] > freqs[1] > freqs[2]


def test_pseudopotential_on_axis_zero():
    assert pseudopotential_energy(BE, FIG1_TRAP, 0.0) == 0.0


def test_pseudopotential_species_ratio():
    # lighter HD+ feels a pseudopotential three times larger
    e_be = pseudopotential_energy(BE, FIG1_TRAP, 10e-6)
    e_hd = pseudopotential_energy(HD, FIG1_TRAP, 10e-6)
    assert e_hd / e_be == pytest.approx(2.98, abs=0.02)


def test_pseudopotential_quadratic_and_q2_over_m():
    e1 = pseudopotential_energy(BE, FIG1_TRAP, 10e-6)
    e2 = pseudopotential_energy(BE, FIG1_TRAP, 20e-6)
    assert e2 == pytest.approx(4 * e1, rel=1e-12)
    # exact Q^2/m scaling at fixed trap and rho
    sp = Species.from_amu_e("x", 3 * 9.012, 2)
    expected = e1 * (sp.charge / BE.charge) ** 2 * (BE.mass / sp.mass)
    assert pseudopotential_energy(sp, FIG1_TRAP, 10e-6) == pytest.approx(
        expected, rel=1e-12)


def test_stability_report_fig1_pair():
    rep = stability_report([BE, HD], FIG1_TRAP)
    assert rep.all_stable
    assert not any(e.outside_preferred_window for e in rep.entries)


def test_stability_report_fig2_pair_window_boundary():
    rep = stability_report([BA, MOL], FIG2_TRAP)
    assert rep.all_stable
    # q_sc = 0.045 counts as inside the preferred window (boundary-inclusive)
    assert not any(e.outside_preferred_window for e in rep.entries)


def test_stability_report_unstable_species():
    # engineer q = 1.2 by scaling the fig1 rf gradient
    q0 = compute_q(BE, FIG1_TRAP)
    trap = TrapConfig(FIG1_TRAP.omega_rf, FIG1_TRAP.rf_gradient * 1.2 / q0,
                      FIG1_TRAP.dc_gradient)
    rep = stability_report([BE], trap)
    entry = rep.entries[0]
    assert entry.q == pytest.approx(1.2, rel=1e-9)
    assert entry.unstable
    # unstable implies outside the preferred window
    assert entry.outside_preferred_window
    assert not rep.all_stable


def test_stability_report_empty_list():
    with pytest.raises(ModelError):
        stability_report([], FIG1_TRAP)


def test_unit_round_trip_12_digits():
    sp = Species.from_amu_e("x", 9.012, 3)
    assert sp.mass_amu == pytest.approx(9.012, rel=1e-12)
    assert sp.charge_e == pytest.approx(3.0, rel=1e-12)
    trap = TrapConfig.from_drive(8.5, 17.6, 30.0)
    assert trap.omega_rf_mhz == pytest.approx(8.5, rel=1e-12)
    assert trap.rf_gradient_v_per_mm2 == pytest.approx(17.6, rel=1e-12)
    assert trap.dc_gradient_v_per_cm2 == pytest.approx(30.0, rel=1e-12)


def test_invalid_domain_objects():
    with pytest.raises(ModelError):
        Species.from_amu_e("x", -1.0, 1)
    with pytest.raises(ModelError):
        Species.from_amu_e("x", 1.0, 0)
    with pytest.raises(ModelError):
        TrapConfig.from_drive(0.0, 17.6, 30.0)
    with pytest.raises(ModelError):
        TrapConfig.from_drive(8.5, 17.6, 0.0)
    with pytest.raises(ModelError):
        TrapConfig.from_drive(8.5, 17.6, 30.0, mode="secular")


def test_constants_positive_and_fixed():
    c = CONSTANTS
    assert all(v > 0 for v in (c.vacuum_permittivity, c.elementary_charge,
                               c.atomic_mass_unit, c.reduced_planck, c.boltzmann))


def test_preset_q_values_match_captions():
    for name, expected in (("fig1", (0.13, 0.39)), ("fig2b", (0.33, 0.045)),
                           ("fig2c", (0.33, 0.045))):
        cfg = preset(name)
        qs = [compute_q(sc.species, cfg.trap) for sc in cfg.species]
        assert qs[0] == pytest.approx(expected[0], abs=0.01)
        assert qs[1] == pytest.approx(expected[1], abs=0.01 if expected[1] > 0.1 else 0.003)
