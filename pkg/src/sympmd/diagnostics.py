"""Per-species energy observables and spatial-state classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import CONSTANTS, ModelError

STRING = "string"
SHELL = "shell"
HELIX = "helix-sections"
DIFFUSE = "diffuse"
MIXED = "mixed"


class WindowTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class SpeciesDiagnostics:
    species: str
    count: int
    e_kin_total: float       # J / particle, period average
    e_kin_secular: float     # J / particle
    e_interaction: float     # J / particle, at period end
    t_secular: float         # K
    gamma: float             # plasma coupling parameter
    n_crystallized: int

    @property
    def e_micromotion(self) -> float:
        return self.e_kin_total - self.e_kin_secular


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    per_species: tuple[SpeciesDiagnostics, ...]

    def species(self, name: str) -> SpeciesDiagnostics:
        for entry in self.per_species:
            if entry.species == name:
                return entry
        raise KeyError(name)


@dataclass(frozen=True)
class StructureThresholds:
    """Classification knobs; the paper gives no numeric criteria, so these are
    exposed in configuration rather than hard-coded."""

    string_radial_fraction: float = 0.10      # of mean same-species NN spacing
    helix_radial_fraction: float = 0.60
    shell_radial_fraction: float = 0.25
    shell_population_fraction: float = 0.60
    diffuse_rms_fraction: float = 1.00
    crystallization_rms_fraction: float = 0.30  # Lindemann-like
    min_window_periods: int = 50
    lone_particle_scale: float = 10e-6          # m, spacing fallback for N=1


@dataclass(frozen=True)
class SpeciesStructure:
    species: str
    label: str
    mean_radius: float    # m, of window-averaged positions
    max_radius: float     # m
    axial_extent: float   # m
    crystallized: tuple[bool, ...]

    @property
    def n_crystallized(self) -> int:
        return sum(self.crystallized)


@dataclass(frozen=True)
class StructureReport:
    per_species: tuple[SpeciesStructure, ...]

    def species(self, name: str) -> SpeciesStructure:
        for entry in self.per_species:
            if entry.species == name:
                return entry
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for e in self.per_species:
            out.append(f"{e.species}: {e.label} "
                       f"({e.n_crystallized}/{len(e.crystallized)} crystallized, "
                       f"mean radius {e.mean_radius * 1e6:.1f} um, "
                       f"axial extent {e.axial_extent * 1e6:.1f} um)")
        return out


def kinetic_energies(samples, masses, mask) -> tuple[float, float]:
    """Period-averaged kinetic energies per particle of one species.

    total:   (2N)^-1 sum_i m_i <v_i^2>
    secular: (2N)^-1 sum_i m_i |<v_i>|^2   (micromotion averaged out)
    """
    v = samples.velocities[:, mask, :]
    if v.shape[1] == 0:
        raise ModelError("empty species subset")
    m = np.asarray(masses)[mask]
    v2 = np.einsum("pij,pij->pi", v, v).mean(axis=0)       # <v^2> per particle
    vbar = v.mean(axis=0)
    vbar2 = np.einsum("ij,ij->i", vbar, vbar)
    e_tot = float(0.5 * (m * v2).mean())
    e_sec = float(0.5 * (m * vbar2).mean())
    return e_tot, e_sec


def interaction_energy(positions, charges, mask) -> float:
    """Average Coulomb interaction energy per particle of one species: half
    the sum of this particle's pair energies with ALL particles."""
    positions = np.asarray(positions, dtype=float)
    charges = np.asarray(charges, dtype=float)
    n = positions.shape[0]
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        raise ModelError("empty species subset")
    if n == 1:
        return 0.0
    diff = positions[idx, None, :] - positions[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    d[np.arange(idx.size), idx] = np.inf
    pair = CONSTANTS.coulomb * charges[idx, None] * charges[None, :] / d
    return float(0.5 * pair.sum(axis=1).mean())


def temperature_and_gamma(e_secular: float, mean_positions, mask,
                          charge: float) -> tuple[float, float]:
    """Secular temperature (3-DOF equipartition) and plasma coupling parameter.

    Gamma uses the Wigner-Seitz radius of the species' ellipsoidal bounding
    density; degenerate axes (on-axis strings) are clamped to half the mean
    nearest-neighbor spacing so the density stays finite.
    """
    t_sec = 2.0 * e_secular / (3.0 * CONSTANTS.boltzmann)
    pts = np.asarray(mean_positions)[mask]
    n = pts.shape[0]
    if n < 2:
        raise ModelError("gamma needs at least 2 particles of the species")
    if t_sec <= 0.0:
        return t_sec, math.inf
    centered = pts - pts.mean(axis=0)
    semi = np.abs(centered).max(axis=0)
    nn = nearest_neighbor_distances(pts)
    floor = 0.5 * float(nn.mean())
    semi = np.maximum(semi, floor)
    a_ws = float((semi[0] * semi[1] * semi[2] / n) ** (1.0 / 3.0))
    gamma = CONSTANTS.coulomb * charge ** 2 / (a_ws * CONSTANTS.boltzmann * t_sec)
    return t_sec, gamma


def nearest_neighbor_distances(points) -> np.ndarray:
    """Distance to the nearest other point, O(n^2)."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n < 2:
        raise ModelError("need at least 2 points")
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(d, np.inf)
    return d.min(axis=1)


@dataclass
class TrajectoryWindow:
    """Per-period secular (period-averaged) positions over a trailing window."""

    times: np.ndarray           # (P,)
    mean_positions: np.ndarray  # (P, N, 3)

    @property
    def n_periods(self) -> int:
        return self.times.size

    @property
    def window_mean(self) -> np.ndarray:
        return self.mean_positions.mean(axis=0)

    def rms_deviation(self) -> np.ndarray:
        """Per-particle RMS wander of the secular position over the window."""
        dev = self.mean_positions - self.window_mean[None, :, :]
        return np.sqrt(np.einsum("pij,pij->pi", dev, dev).mean(axis=0))


def crystallization_detect(window: TrajectoryWindow, mask,
                           thresholds: StructureThresholds = StructureThresholds()):
    """Flag particles whose secular position wanders less than a fraction of
    their nearest-neighbor distance over the window (Lindemann-like)."""
    if window.n_periods < thresholds.min_window_periods:
        raise WindowTooShortError(
            f"window spans {window.n_periods} periods, need "
            f">= {thresholds.min_window_periods}")
    pts = window.window_mean
    rms = window.rms_deviation()
    if pts.shape[0] >= 2:
        nn = nearest_neighbor_distances(pts)
    else:
        nn = np.full(pts.shape[0], thresholds.lone_particle_scale)
    flags = rms < thresholds.crystallization_rms_fraction * nn
    return flags[mask]


def classify_structure(window: TrajectoryWindow, species_index, species_list,
                       thresholds: StructureThresholds = StructureThresholds()
                       ) -> StructureReport:
    """Label each species' spatial arrangement from window-averaged positions.

    string: all ions within a small fraction of the ion spacing from the axis;
    shell: a radial band of off-axis ions; helix-sections: near-string with
    adjacent ions pushed off axis in alternating directions; diffuse: secular
    positions still wander by more than the spacing; mixed: none of the above.
    """
    if window.n_periods < thresholds.min_window_periods:
        raise WindowTooShortError(
            f"window spans {window.n_periods} periods, need "
            f">= {thresholds.min_window_periods}")
    species_index = np.asarray(species_index)
    all_pts = window.window_mean
    rms_all = window.rms_deviation()
    entries = []
    for s, sp in enumerate(species_list):
        mask = species_index == s
        flags = crystallization_detect(window, mask, thresholds)
        pts = all_pts[mask]
        rms = rms_all[mask]
        n = pts.shape[0]
        if n == 0:
            continue
        r = np.hypot(pts[:, 0], pts[:, 1])
        axial = float(pts[:, 2].max() - pts[:, 2].min()) if n > 1 else 0.0
        if n >= 2:
            spacing = float(nearest_neighbor_distances(pts).mean())
        elif all_pts.shape[0] >= 2:
            spacing = float(nearest_neighbor_distances(all_pts)[mask][0])
        else:
            spacing = thresholds.lone_particle_scale
        label = _label_species(pts, r, rms, axial, spacing, thresholds)
        entries.append(SpeciesStructure(
            species=sp.name, label=label,
            mean_radius=float(r.mean()), max_radius=float(r.max()),
            axial_extent=axial, crystallized=tuple(bool(f) for f in flags)))
    return StructureReport(tuple(entries))


def _label_species(pts, r, rms, axial, spacing, th: StructureThresholds) -> str:
    if np.median(rms) > th.diffuse_rms_fraction * spacing:
        return DIFFUSE
    r_max = float(r.max())
    if r_max < th.string_radial_fraction * spacing:
        return STRING
    if (r_max < th.helix_radial_fraction * spacing
            and axial > 2.0 * r_max
            and _has_alternating_bulges(pts, r, spacing, th)):
        return HELIX
    off_axis = r > th.shell_radial_fraction * spacing
    if off_axis.mean() >= th.shell_population_fraction:
        return SHELL
    return MIXED


def _has_alternating_bulges(pts, r, spacing, th: StructureThresholds) -> bool:
    """Adjacent-in-z pairs both off axis with azimuthal offsets > 90 deg."""
    order = np.argsort(pts[:, 2])
    r_thr = th.string_radial_fraction * spacing
    hits = 0
    total = 0
    for a, b in zip(order[:-1], order[1:]):
        if r[a] > r_thr and r[b] > r_thr:
            total += 1
            phi_a = math.atan2(pts[a, 1], pts[a, 0])
            phi_b = math.atan2(pts[b, 1], pts[b, 0])
            dphi = abs((phi_a - phi_b + math.pi) % (2.0 * math.pi) - math.pi)
            if dphi > math.pi / 2.0:
                hits += 1
    return total > 0 and hits * 2 >= total


def make_record(time: float, samples, field, window: TrajectoryWindow | None,
                thresholds: StructureThresholds = StructureThresholds()
                ) -> DiagnosticsRecord:
    """Assemble the per-species record for one rf period."""
    entries = []
    for s, sp in enumerate(field.species_list):
        mask = field.species_index == s
        n = int(mask.sum())
        if n == 0:
            continue
        e_tot, e_sec = kinetic_energies(samples, field.mass, mask)
        e_int = interaction_energy(samples.end_positions, field.charge, mask)
        if n >= 2:
            t_sec, gamma = temperature_and_gamma(
                e_sec, samples.mean_positions, mask, sp.charge)
        else:
            t_sec = 2.0 * e_sec / (3.0 * CONSTANTS.boltzmann)
            gamma = math.nan
        n_cryst = 0
        if window is not None and window.n_periods >= thresholds.min_window_periods:
            n_cryst = int(crystallization_detect(window, mask, thresholds).sum())
        entries.append(SpeciesDiagnostics(
            species=sp.name, count=n, e_kin_total=e_tot, e_kin_secular=e_sec,
            e_interaction=e_int, t_secular=t_sec, gamma=gamma,
            n_crystallized=n_cryst))
    return DiagnosticsRecord(time, tuple(entries))
