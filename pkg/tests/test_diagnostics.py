import math

import numpy as np
import pytest

from sympmd.diagnostics import (DIFFUSE, HELIX, SHELL, STRING,
                                StructureThresholds, TrajectoryWindow,
                                WindowTooShortError, classify_structure,
                                crystallization_detect, interaction_energy,
                                kinetic_energies, nearest_neighbor_distances,
                                temperature_and_gamma)
from sympmd.integrator import PeriodSamples
from sympmd.model import CONSTANTS, Species

BE = Species.from_amu_e("Be+", 9.012, 1)
HD = Species.from_amu_e("HD+", 3.021, 1)


def _samples(velocities, positions=None):
    velocities = np.asarray(velocities, dtype=float)
    if positions is None:
        positions = np.zeros_like(velocities)
    return PeriodSamples(0.0, 1e-7, velocities, positions,
                         positions[-1], velocities[-1])


# ------------------------------------------------------- kinetic energies

def test_kinetic_constant_velocity():
    v = np.array([30.0, -20.0, 10.0])
    vel = np.tile(v, (8, 3, 1))  # 8 phases, 3 particles
    masses = np.full(3, BE.mass)
    e_tot, e_sec = kinetic_energies(_samples(vel), masses, np.ones(3, bool))
    expected = 0.5 * BE.mass * v @ v
    assert e_tot == pytest.approx(expected, rel=1e-12)
    assert e_sec == pytest.approx(expected, rel=1e-12)


def test_kinetic_pure_micromotion():
    # v(t) = a cos(W t) x: zero mean, E_total = m a^2 / 4
    M = 32
    a = 50.0
    phases = 2 * math.pi * np.arange(M) / M
    vel = np.zeros((M, 1, 3))
    vel[:, 0, 0] = a * np.cos(phases)
    e_tot, e_sec = kinetic_energies(_samples(vel), np.array([BE.mass]),
                                    np.ones(1, bool))
    assert e_sec == pytest.approx(0.0, abs=1e-30)
    assert e_tot == pytest.approx(BE.mass * a ** 2 / 4, rel=1e-12)


def test_secular_below_total_random_samples():
    rng = np.random.default_rng(1)
    for _ in range(20):
        vel = rng.normal(0, 10, (16, 5, 3))
        masses = np.full(5, BE.mass)
        e_tot, e_sec = kinetic_energies(_samples(vel), masses, np.ones(5, bool))
        assert e_sec <= e_tot * (1 + 1e-12)


def test_kinetic_relabeling_invariance():
    rng = np.random.default_rng(2)
    vel = rng.normal(0, 5, (16, 6, 3))
    masses = np.full(6, HD.mass)
    mask = np.ones(6, bool)
    e1 = kinetic_energies(_samples(vel), masses, mask)
    perm = rng.permutation(6)
    e2 = kinetic_energies(_samples(vel[:, perm, :]), masses, mask)
    assert e1[0] == pytest.approx(e2[0], rel=1e-12)
    assert e1[1] == pytest.approx(e2[1], rel=1e-12)


# ----------------------------------------------------- interaction energy

def test_interaction_single_particle():
    assert interaction_energy(np.zeros((1, 3)),
                              np.array([BE.charge]), np.ones(1, bool)) == 0.0


def test_interaction_two_charges_hand_value():
    d = 21.3e-6
    pos = np.array([[0, 0, 0], [0, 0, d]], dtype=float)
    qs = np.full(2, CONSTANTS.elementary_charge)
    e = interaction_energy(pos, qs, np.ones(2, bool))
    assert e == pytest.approx(5.41e-24, rel=0.01)


def test_interaction_qsq_scaling():
    rng = np.random.default_rng(3)
    pos = rng.uniform(-30e-6, 30e-6, (6, 3))
    qs = np.full(6, CONSTANTS.elementary_charge)
    mask = np.ones(6, bool)
    e1 = interaction_energy(pos, qs, mask)
    e2 = interaction_energy(pos, 2 * qs, mask)
    assert e2 == pytest.approx(4 * e1, rel=1e-12)


# --------------------------------------------------- temperature and gamma

def test_temperature_definitional():
    e_sec = 1.5 * CONSTANTS.boltzmann * 1.0
    pts = np.array([[0, 0, -10e-6], [0, 0, 10e-6]], dtype=float)
    t, _ = temperature_and_gamma(e_sec, pts, np.ones(2, bool), BE.charge)
    assert t == pytest.approx(1.0, rel=1e-12)


def test_gamma_inverse_in_temperature():
    pts = np.array([[0, 0, -10e-6], [0, 0, 10e-6], [10e-6, 0, 0]], dtype=float)
    mask = np.ones(3, bool)
    e = 1.5 * CONSTANTS.boltzmann * 0.01
    _, g1 = temperature_and_gamma(e, pts, mask, BE.charge)
    _, g2 = temperature_and_gamma(e / 2, pts, mask, BE.charge)
    assert g2 == pytest.approx(2 * g1, rel=1e-12)


def test_gamma_infinite_at_zero_temperature():
    pts = np.array([[0, 0, -10e-6], [0, 0, 10e-6]], dtype=float)
    t, g = temperature_and_gamma(0.0, pts, np.ones(2, bool), BE.charge)
    assert t == 0.0
    assert math.isinf(g)


# ------------------------------------------------------------- structure

def _window(mean_positions, jitter=0.0, periods=60, seed=0):
    """Window of per-period mean positions around the given configuration."""
    rng = np.random.default_rng(seed)
    base = np.asarray(mean_positions, dtype=float)
    traj = np.tile(base, (periods, 1, 1))
    if jitter:
        traj = traj + rng.normal(0, jitter, traj.shape)
    times = 1e-7 * np.arange(periods)
    return TrajectoryWindow(times, traj)


def _string_positions(n, spacing=20e-6):
    z = (np.arange(n) - (n - 1) / 2) * spacing
    pts = np.zeros((n, 3))
    pts[:, 2] = z
    return pts


def _shell_positions(n, radius=25e-6, z_extent=40e-6, seed=4):
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0, 2 * math.pi, n)
    pts = np.stack([radius * np.cos(phi), radius * np.sin(phi),
                    rng.uniform(-z_extent, z_extent, n)], axis=1)
    return pts


def test_classify_string():
    window = _window(_string_positions(5), jitter=10e-9)
    rep = classify_structure(window, np.zeros(5, int), [HD])
    assert rep.species("HD+").label == STRING


def test_classify_shell():
    window = _window(_shell_positions(20), jitter=10e-9)
    rep = classify_structure(window, np.zeros(20, int), [BE])
    assert rep.species("Be+").label == SHELL


def test_classify_single_particle_at_center():
    window = _window(np.zeros((1, 3)), jitter=1e-9)
    rep = classify_structure(window, np.zeros(1, int), [BE])
    assert rep.species("Be+").label == STRING


def test_classify_diffuse_hot_cloud():
    # secular positions wander by more than the spacing
    window = _window(_string_positions(6, spacing=20e-6), jitter=40e-6, seed=1)
    rep = classify_structure(window, np.zeros(6, int), [HD])
    assert rep.species("HD+").label == DIFFUSE


def test_classify_helix_sections():
    # near-string chain whose adjacent members bulge to alternating sides
    n, spacing = 8, 60e-6
    pts = _string_positions(n, spacing)
    r = 18e-6
    for i in range(n):
        phi = math.pi * i  # alternate +x / -x
        pts[i, 0] = r * math.cos(phi)
        pts[i, 1] = r * math.sin(phi)
    window = _window(pts, jitter=10e-9)
    rep = classify_structure(window, np.zeros(n, int), [HD])
    assert rep.species("HD+").label == HELIX


def test_classify_rotation_reflection_invariance():
    pts = _shell_positions(15, seed=8)
    for transform in (
            lambda p: p @ np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]]).T,
            lambda p: p * np.array([1.0, 1.0, -1.0])):
        w1 = _window(pts, jitter=5e-9, seed=3)
        w2 = TrajectoryWindow(w1.times, transform(w1.mean_positions[:, :, :]))
        r1 = classify_structure(w1, np.zeros(15, int), [BE])
        r2 = classify_structure(w2, np.zeros(15, int), [BE])
        assert r1.species("Be+").label == r2.species("Be+").label


def test_crystallization_frozen_vs_hot():
    pts = _string_positions(5)
    frozen = _window(pts, jitter=1e-9)
    flags = crystallization_detect(frozen, np.ones(5, bool))
    assert flags.all()
    hot = _window(pts, jitter=30e-6, seed=2)
    flags = crystallization_detect(hot, np.ones(5, bool))
    assert not flags.any()


def test_window_too_short_refused():
    window = _window(_string_positions(4), periods=10)
    with pytest.raises(WindowTooShortError):
        classify_structure(window, np.zeros(4, int), [HD])
    with pytest.raises(WindowTooShortError):
        crystallization_detect(window, np.ones(4, bool))


def test_nearest_neighbor_distances():
    pts = np.array([[0, 0, 0], [0, 0, 1.0], [0, 0, 3.0]])
    np.testing.assert_allclose(nearest_neighbor_distances(pts), [1.0, 1.0, 2.0])
