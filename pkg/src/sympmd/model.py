"""Domain types, unit conversion and closed-form physics of a linear rf trap.

Everything downstream works in SI; the ``*_from_*`` constructors are the only
place where human-facing units (amu, elementary charges, MHz, V/mm^2, V/cm^2)
enter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA-2018 constants, SI. Compiled in, never configurable."""

    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    elementary_charge: float = 1.602176634e-19     # C
    atomic_mass_unit: float = 1.66053906660e-27    # kg
    reduced_planck: float = 1.054571817e-34        # J s
    boltzmann: float = 1.380649e-23                # J/K

    @property
    def coulomb(self) -> float:
        """1/(4 pi eps0)."""
        return 1.0 / (4.0 * math.pi * self.vacuum_permittivity)


CONSTANTS = PhysicalConstants()

# species roles
LASER_COOLED = "laser-cooled"
SYMPATHETIC = "sympathetic"

# unit conversions (human-facing boundary; internal arithmetic is SI)
MM2_PER_M2 = 1.0e6   # V/mm^2 -> V/m^2
CM2_PER_M2 = 1.0e4   # V/cm^2 -> V/m^2


def amu_to_kg(m_amu: float) -> float:
    return m_amu * CONSTANTS.atomic_mass_unit


def kg_to_amu(m_kg: float) -> float:
    return m_kg / CONSTANTS.atomic_mass_unit


def e_to_coulomb(q_e: float) -> float:
    return q_e * CONSTANTS.elementary_charge


def coulomb_to_e(q_c: float) -> float:
    return q_c / CONSTANTS.elementary_charge


def mhz_to_rad_per_s(f_mhz: float) -> float:
    return 2.0 * math.pi * f_mhz * 1.0e6


def rad_per_s_to_mhz(w: float) -> float:
    return w / (2.0 * math.pi * 1.0e6)


class ModelError(ValueError):
    """Invalid domain object or parameter."""


class RadialDefocusError(ModelError):
    """dc defocusing exceeds the rf radial focusing (omega_rho^2 <= 0)."""


@dataclass(frozen=True)
class Transition:
    """Optical cooling transition: wavelength (m) and natural linewidth (rad/s)."""

    wavelength: float
    linewidth: float

    def __post_init__(self):
        if self.wavelength <= 0 or self.linewidth <= 0:
            raise ModelError("transition wavelength and linewidth must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def doppler_temperature(self) -> float:
        """Doppler cooling limit hbar*gamma/(2 kB)."""
        return CONSTANTS.reduced_planck * self.linewidth / (2.0 * CONSTANTS.boltzmann)


@dataclass(frozen=True)
class Species:
    """An ion species: mass, charge, cooling role, optional optical transition."""

    name: str
    mass: float     # kg
    charge: float   # C, positive ions only
    role: str = SYMPATHETIC
    transition: Transition | None = None

    def __post_init__(self):
        if self.mass <= 0:
            raise ModelError(f"species {self.name!r}: mass must be positive")
        if self.charge <= 0:
            raise ModelError(f"species {self.name!r}: charge must be positive")
        if self.role not in (LASER_COOLED, SYMPATHETIC):
            raise ModelError(f"species {self.name!r}: unknown role {self.role!r}")

    @classmethod
    def from_amu_e(cls, name, mass_amu, charge_e, role=SYMPATHETIC,
                   wavelength=None, linewidth=None) -> "Species":
        """Build from configured units (amu, integer multiples of e)."""
        transition = None
        if wavelength is not None or linewidth is not None:
            if wavelength is None or linewidth is None:
                raise ModelError(
                    f"species {name!r}: wavelength and linewidth go together")
            transition = Transition(wavelength, linewidth)
        return cls(name, amu_to_kg(mass_amu), e_to_coulomb(charge_e), role, transition)

    @property
    def mass_amu(self) -> float:
        return kg_to_amu(self.mass)

    @property
    def charge_e(self) -> float:
        return coulomb_to_e(self.charge)

    @property
    def charge_to_mass(self) -> float:
        return self.charge / self.mass

    def require_transition(self, why: str) -> Transition:
        if self.transition is None:
            raise ModelError(f"species {self.name!r}: {why} needs transition data"
                             " (wavelength, linewidth)")
        return self.transition


RF_MODE = "rf"
PSEUDO_MODE = "pseudo"


@dataclass(frozen=True)
class TrapConfig:
    """Linear-trap drive: rf frequency and the two field gradients.

    ``rf_gradient`` is V_rf/r0^2 and ``dc_gradient`` is U_dc/d^2, both in
    V/m^2; only these combinations enter the field, never the electrode
    geometry itself.
    """

    omega_rf: float      # rad/s
    rf_gradient: float   # V/m^2
    dc_gradient: float   # V/m^2
    mode: str = RF_MODE

    def __post_init__(self):
        if self.omega_rf <= 0:
            raise ModelError("omega_rf must be positive")
        if self.rf_gradient < 0:
            raise ModelError("rf_gradient must be non-negative")
        if self.dc_gradient <= 0:
            raise ModelError("dc_gradient must be positive (axial confinement)")
        if self.mode not in (RF_MODE, PSEUDO_MODE):
            raise ModelError(f"unknown trap mode {self.mode!r}")

    @classmethod
    def from_drive(cls, omega_rf_mhz, rf_gradient_v_per_mm2,
                   dc_gradient_v_per_cm2, mode=RF_MODE) -> "TrapConfig":
        """Build from configured units: Omega/2pi in MHz, V/mm^2, V/cm^2."""
        return cls(mhz_to_rad_per_s(omega_rf_mhz),
                   rf_gradient_v_per_mm2 * MM2_PER_M2,
                   dc_gradient_v_per_cm2 * CM2_PER_M2,
                   mode)

    @property
    def rf_period(self) -> float:
        return 2.0 * math.pi / self.omega_rf

    @property
    def omega_rf_mhz(self) -> float:
        return rad_per_s_to_mhz(self.omega_rf)

    @property
    def rf_gradient_v_per_mm2(self) -> float:
        return self.rf_gradient / MM2_PER_M2

    @property
    def dc_gradient_v_per_cm2(self) -> float:
        return self.dc_gradient / CM2_PER_M2


def compute_q(species: Species, trap: TrapConfig) -> float:
    """Mathieu drive parameter q = 2 (Q/m) (V_rf/r0^2) / Omega^2."""
    return 2.0 * species.charge_to_mass * trap.rf_gradient / trap.omega_rf ** 2


# single-particle stability limit of the Mathieu equation at zero dc offset
Q_UNSTABLE = 0.9
# operating window favoured to keep rf heating low; the lower bound carries a
# small tolerance because published operating points round to it (q = 0.045)
Q_WINDOW = (0.05, 0.4)
Q_WINDOW_TOL = 0.005


def secular_frequencies(species: Species, trap: TrapConfig) -> tuple[float, float]:
    """Lowest-order secular frequencies (omega_rho, omega_z) in rad/s.

    omega_z^2 = (Q/m) * dc_gradient, omega_rho^2 = (q Omega / 2 sqrt 2)^2
    - omega_z^2 / 2.  Raises RadialDefocusError when the dc term wins.
    """
    q = compute_q(species, trap)
    wz2 = species.charge_to_mass * trap.dc_gradient
    wr2 = (q * trap.omega_rf / (2.0 * math.sqrt(2.0))) ** 2 - wz2 / 2.0
    if wr2 <= 0.0:
        raise RadialDefocusError(
            f"species {species.name!r}: radial confinement lost "
            f"(omega_rho^2 = {wr2:.3e} (rad/s)^2)")
    return math.sqrt(wr2), math.sqrt(wz2)


def pseudopotential_energy(species: Species, trap: TrapConfig, rho: float) -> float:
    """Time-averaged radial trap potential rho^2 Q^2 (V_rf/r0^2)^2 / (4 m Omega^2)."""
    if rho < 0:
        raise ModelError("rho must be non-negative")
    return (rho ** 2 * species.charge ** 2 * trap.rf_gradient ** 2
            / (4.0 * species.mass * trap.omega_rf ** 2))


@dataclass(frozen=True)
class SpeciesStability:
    species: str
    q: float
    omega_rho: float | None   # rad/s; None when radially unbound
    omega_z: float
    unstable: bool
    outside_preferred_window: bool
    axially_unbound: bool     # set when omega_rho^2 <= 0 (dc defocus wins)

    @property
    def stable(self) -> bool:
        return not (self.unstable or self.axially_unbound)


@dataclass(frozen=True)
class StabilityReport:
    entries: tuple[SpeciesStability, ...]

    @property
    def all_stable(self) -> bool:
        return all(e.stable for e in self.entries)

    def lines(self) -> list[str]:
        out = ["species        q       w_rho/2pi   w_z/2pi    verdict"]
        for e in self.entries:
            wr = "--" if e.omega_rho is None else f"{e.omega_rho / (2e3 * math.pi):8.1f} kHz"
            flags = []
            if e.unstable:
                flags.append("UNSTABLE")
            if e.axially_unbound:
                flags.append("radially-unbound")
            if e.outside_preferred_window:
                flags.append("outside q-window")
            out.append(f"{e.species:12s} {e.q:7.4f}  {wr}  "
                       f"{e.omega_z / (2e3 * math.pi):8.1f} kHz   "
                       + (",".join(flags) if flags else "ok"))
        return out


def stability_report(species_list, trap: TrapConfig) -> StabilityReport:
    """Per-species q, secular frequencies and stability flags."""
    if not species_list:
        raise ModelError("empty species list")
    entries = []
    for sp in species_list:
        q = compute_q(sp, trap)
        unstable = q >= Q_UNSTABLE
        lo, hi = Q_WINDOW
        in_window = (lo - Q_WINDOW_TOL) <= q <= (hi + Q_WINDOW_TOL)
        try:
            wr, wz = secular_frequencies(sp, trap)
            unbound = False
        except RadialDefocusError:
            wr = None
            wz = math.sqrt(sp.charge_to_mass * trap.dc_gradient)
            unbound = True
        entries.append(SpeciesStability(
            species=sp.name, q=q, omega_rho=wr, omega_z=wz,
            unstable=unstable,
            outside_preferred_window=unstable or not in_window,
            axially_unbound=unbound))
    return StabilityReport(tuple(entries))
