"""Force terms: trap field, pairwise Coulomb, laser cooling, recoil noise.

The deterministic right-hand side of the equations of motion is assembled by
``ForceField.accelerations``; stochastic recoil kicks are generated separately
(``ForceField.recoil_momenta``) and applied by the integrator between steps.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import (CONSTANTS, LASER_COOLED, PSEUDO_MODE, RF_MODE, ModelError,
                    Species, TrapConfig)

# pair distances below this signal a broken integration step, never physics:
# real closest approaches at the simulated energies stay above ~100 nm
MIN_PAIR_DISTANCE = 1.0e-9

VISCOUS = "viscous"
SEMICLASSICAL = "semiclassical"
NO_COOLING = "none"


class ForceError(RuntimeError):
    pass


class CoincidentParticlesError(ForceError):
    """Two particles closer than MIN_PAIR_DISTANCE: the step size collapsed."""


def beta_max(transition) -> float:
    """Upper bound pi^2 hbar / lambda^2 on the viscous friction coefficient."""
    return math.pi ** 2 * CONSTANTS.reduced_planck / transition.wavelength ** 2


@dataclass(frozen=True)
class CoolingConfig:
    """Laser-cooling model parameters.

    ``beta`` is the viscous friction coefficient; the semiclassical model uses
    the scattering-force shape with a sawtooth detuning scan instead.  Recoil
    noise adds fluctuation-dissipation momentum kicks with stationary
    temperature ``t_min`` (default: Doppler limit of the coolant transition).
    """

    model: str = NO_COOLING
    beta: float = 0.0                      # kg/s
    enhancement: float = 8.0
    saturation: float = 1.0
    scan_period: float = 0.0               # s
    detuning_start: float = 0.0            # rad/s, < -gamma/2
    beam_direction: tuple[float, float, float] = (
        1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0))
    recoil_noise: bool = False
    t_min: float | None = None             # K

    def __post_init__(self):
        if self.model not in (VISCOUS, SEMICLASSICAL, NO_COOLING):
            raise ModelError(f"unknown cooling model {self.model!r}")
        norm = math.sqrt(sum(c * c for c in self.beam_direction))
        if norm == 0.0:
            raise ModelError("beam_direction must be a nonzero vector")
        if abs(norm - 1.0) > 1e-12:  # keep already-normalized vectors bitwise
            object.__setattr__(self, "beam_direction",
                               tuple(c / norm for c in self.beam_direction))
        if self.t_min is not None and self.t_min <= 0:
            raise ModelError("t_min must be positive")


def validate_cooling(cooling: CoolingConfig, coolant: Species | None) -> None:
    """Check cooling parameters against the laser-cooled species."""
    if cooling.model == NO_COOLING and not cooling.recoil_noise:
        return
    if coolant is None:
        raise ModelError("cooling is configured but no species is laser-cooled")
    if cooling.model == VISCOUS:
        if cooling.beta <= 0:
            raise ModelError("viscous cooling needs beta > 0")
        if coolant.transition is not None:
            bmax = beta_max(coolant.transition)
            if cooling.beta > bmax:
                raise ModelError(
                    f"beta = {cooling.beta:.3e} kg/s exceeds the optimum-detuning "
                    f"bound pi^2*hbar/lambda^2 = {bmax:.3e} kg/s")
    if cooling.model == SEMICLASSICAL:
        tr = coolant.require_transition("semiclassical cooling")
        if cooling.scan_period <= 0:
            raise ModelError("semiclassical cooling needs scan_period > 0")
        if cooling.detuning_start >= -tr.linewidth / 2.0:
            raise ModelError("detuning_start must be below -gamma/2")
        if cooling.saturation <= 0 or cooling.enhancement <= 0:
            raise ModelError("saturation and enhancement must be positive")
    if cooling.recoil_noise and cooling.t_min is None:
        coolant.require_transition("recoil noise with the default Doppler t_min")


def trap_field(trap: TrapConfig, x, t: float, species: Species | None = None):
    """Electric field (V/m) of the linear trap at position(s) x and time t.

    rf mode:    E = ( x (G_rf cos Wt + G_dc/2),
                      y (-G_rf cos Wt + G_dc/2),
                     -z G_dc )
    pseudo mode: the rf term is replaced by -grad(V_pseudo)/Q of ``species``
    (time independent); the dc terms are unchanged.
    """
    x = np.asarray(x, dtype=float)
    E = np.empty_like(x)
    gdc = trap.dc_gradient
    if trap.mode == RF_MODE:
        grf = trap.rf_gradient * math.cos(trap.omega_rf * t)
        E[..., 0] = x[..., 0] * (grf + gdc / 2.0)
        E[..., 1] = x[..., 1] * (-grf + gdc / 2.0)
    else:
        if species is None:
            raise ModelError("pseudo-mode field depends on the species (Q/m)")
        # -dV_pseudo/dx / Q = -(Q G_rf^2 / (2 m W^2)) * x
        cps = (species.charge * trap.rf_gradient ** 2
               / (2.0 * species.mass * trap.omega_rf ** 2))
        E[..., 0] = x[..., 0] * (-cps + gdc / 2.0)
        E[..., 1] = x[..., 1] * (-cps + gdc / 2.0)
    E[..., 2] = -gdc * x[..., 2]
    return E


def coulomb_forces(positions, charges) -> np.ndarray:
    """Exact O(N^2) pairwise Coulomb forces (N) on each particle."""
    positions = np.asarray(positions, dtype=float)
    charges = np.asarray(charges, dtype=float)
    n = positions.shape[0]
    if n == 1:
        return np.zeros_like(positions)
    qq = CONSTANTS.coulomb * np.outer(charges, charges)
    np.fill_diagonal(qq, 0.0)
    return _pair_sum(positions, qq)


def _pair_sum(positions, qq, row_slice=slice(None)):
    """Force rows ``row_slice`` of the pair sum; per-row reduction order is
    fixed by the j-axis, so chunking over rows is bitwise reproducible."""
    diff = positions[row_slice, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    # silence the self-term before the distance guard
    if row_slice == slice(None):
        np.fill_diagonal(d2, np.inf)
    else:
        idx = np.arange(*row_slice.indices(positions.shape[0]))
        d2[np.arange(idx.size), idx] = np.inf
    dmin2 = d2.min()
    if dmin2 < MIN_PAIR_DISTANCE ** 2:
        raise CoincidentParticlesError(
            f"pair distance {math.sqrt(dmin2):.3e} m below "
            f"{MIN_PAIR_DISTANCE:.0e} m; integration step is broken")
    w = qq[row_slice] / (d2 * np.sqrt(d2))
    return np.einsum("ij,ijk->ik", w, diff)


def viscous_force(beta: float, v) -> np.ndarray:
    """Linear viscous damping -beta * v."""
    if beta < 0:
        raise ModelError("beta must be non-negative")
    return -beta * np.asarray(v, dtype=float)


def sawtooth_detuning(cooling: CoolingConfig, species: Species, t: float) -> float:
    """Detuning ramped linearly from detuning_start to -gamma/2 each scan period."""
    gamma = species.require_transition("sawtooth detuning").linewidth
    end = -gamma / 2.0
    frac = t / cooling.scan_period
    frac -= math.floor(frac)
    return cooling.detuning_start + (end - cooling.detuning_start) * frac


def semiclassical_force(cooling: CoolingConfig, species: Species, v, t: float):
    """Two-level scattering force along the beam, Lorentzian in the
    Doppler-shifted detuning, enhanced by ``cooling.enhancement``."""
    tr = species.require_transition("semiclassical cooling force")
    k = tr.wavenumber
    gamma = tr.linewidth
    s = cooling.saturation
    delta = sawtooth_detuning(cooling, species, t)
    n = np.asarray(cooling.beam_direction)
    v = np.asarray(v, dtype=float)
    vproj = v @ n
    mag = (cooling.enhancement * CONSTANTS.reduced_planck * k * (gamma / 2.0) * s
           / (1.0 + s + (2.0 * (delta - k * vproj) / gamma) ** 2))
    return np.multiply.outer(mag, n)


def effective_friction(cooling: CoolingConfig, species: Species) -> float:
    """Friction coefficient paired with the recoil noise.

    Viscous model: beta itself.  Semiclassical model: the scattering force
    linearized in velocity at the scan endpoint delta = -gamma/2, where the
    ions spend the cold end of every sweep.
    """
    if cooling.model == VISCOUS:
        return cooling.beta
    if cooling.model == SEMICLASSICAL:
        tr = species.require_transition("recoil noise")
        k = tr.wavenumber
        s = cooling.saturation
        return (2.0 * cooling.enhancement * CONSTANTS.reduced_planck * k ** 2
                * s / (2.0 + s) ** 2)
    return 0.0


def recoil_target_temperature(cooling: CoolingConfig, species: Species) -> float:
    if cooling.t_min is not None:
        return cooling.t_min
    return species.require_transition("recoil noise").doppler_temperature


def recoil_kicks(cooling: CoolingConfig, species: Species, dt: float, rng,
                 n: int = 1) -> np.ndarray:
    """Zero-mean Gaussian momentum increments (n, 3) for ``n`` particles.

    Per-axis variance 2 beta_eff kB T_min dt: fluctuation-dissipation pairing
    so a single cooled ion reaches the stationary temperature T_min.
    """
    if dt <= 0:
        raise ModelError("dt must be positive")
    if not cooling.recoil_noise:
        return np.zeros((n, 3))
    beta_eff = effective_friction(cooling, species)
    t_min = recoil_target_temperature(cooling, species)
    sigma = math.sqrt(2.0 * beta_eff * CONSTANTS.boltzmann * t_min * dt)
    return sigma * rng.standard_normal((n, 3))


class ForceField:
    """Everything on the right-hand side of the equations of motion, bound to
    a fixed particle composition.

    ``species_index`` maps particle slots to entries of ``species_list``; the
    composition never changes during a run.
    """

    def __init__(self, trap: TrapConfig, species_list, cooling: CoolingConfig,
                 species_index, constants: "PhysicalConstants" = CONSTANTS,
                 workers: int = 1):
        if not species_list:
            raise ModelError("species table must not be empty")
        self.trap = trap
        self.species_list = tuple(species_list)
        self.cooling = cooling
        self.constants = constants
        self.workers = max(1, int(workers))
        self._pool = None

        coolants = [sp for sp in self.species_list if sp.role == LASER_COOLED]
        if len(coolants) > 1:
            raise ModelError("at most one laser-cooled species is supported")
        self.coolant = coolants[0] if coolants else None
        validate_cooling(cooling, self.coolant)

        self.species_index = np.asarray(species_index, dtype=np.intp)
        if self.species_index.ndim != 1 or self.species_index.size == 0:
            raise ModelError("species_index must be a non-empty 1-d array")
        if self.species_index.min() < 0 or self.species_index.max() >= len(self.species_list):
            raise ModelError("species_index out of range")

        masses = np.array([sp.mass for sp in self.species_list])
        charges = np.array([sp.charge for sp in self.species_list])
        self.mass = masses[self.species_index]            # (N,)
        self.charge = charges[self.species_index]         # (N,)
        self.inv_mass = 1.0 / self.mass
        lc = np.array([sp.role == LASER_COOLED for sp in self.species_list])
        self.lc_mask = lc[self.species_index]             # (N,) bool
        self.n_lc = int(self.lc_mask.sum())

        self.qq = constants.coulomb * np.outer(self.charge, self.charge)
        np.fill_diagonal(self.qq, 0.0)
        # pseudo-mode radial curvature Q^2 G_rf^2 / (2 m^2 W^2) per particle
        self._pseudo_w2 = (self.charge ** 2 * trap.rf_gradient ** 2
                           / (2.0 * self.mass ** 2 * trap.omega_rf ** 2))
        self._recoil_sigma_coeff = 0.0
        if cooling.recoil_noise and self.coolant is not None:
            self._recoil_sigma_coeff = math.sqrt(
                2.0 * effective_friction(cooling, self.coolant)
                * constants.boltzmann
                * recoil_target_temperature(cooling, self.coolant))

    @property
    def n_particles(self) -> int:
        return self.species_index.size

    @property
    def has_recoil_noise(self) -> bool:
        return self._recoil_sigma_coeff != 0.0 and self.n_lc > 0

    def species_mask(self, name: str) -> np.ndarray:
        for i, sp in enumerate(self.species_list):
            if sp.name == name:
                return self.species_index == i
        raise ModelError(f"unknown species {name!r}")

    # -- deterministic terms -------------------------------------------------

    def _coulomb(self, positions) -> np.ndarray:
        n = positions.shape[0]
        if n == 1:
            return np.zeros_like(positions)
        if self.workers == 1 or n < 32:
            return _pair_sum(positions, self.qq)
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.workers)
        bounds = np.linspace(0, n, self.workers + 1).astype(int)
        chunks = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        parts = self._pool.map(lambda sl: _pair_sum(positions, self.qq, sl), chunks)
        return np.concatenate(list(parts), axis=0)

    def accelerations(self, positions, velocities, t: float) -> np.ndarray:
        """(N, 3) accelerations from trap + Coulomb + deterministic cooling."""
        F = self._coulomb(positions)
        gdc = self.trap.dc_gradient
        if self.trap.mode == RF_MODE:
            grf = self.trap.rf_gradient * math.cos(self.trap.omega_rf * t)
            F[:, 0] += self.charge * positions[:, 0] * (grf + gdc / 2.0)
            F[:, 1] += self.charge * positions[:, 1] * (-grf + gdc / 2.0)
            F[:, 2] += self.charge * positions[:, 2] * (-gdc)
            a = F * self.inv_mass[:, None]
        else:
            F[:, 0] += self.charge * positions[:, 0] * (gdc / 2.0)
            F[:, 1] += self.charge * positions[:, 1] * (gdc / 2.0)
            F[:, 2] += self.charge * positions[:, 2] * (-gdc)
            a = F * self.inv_mass[:, None]
            a[:, 0] -= self._pseudo_w2 * positions[:, 0]
            a[:, 1] -= self._pseudo_w2 * positions[:, 1]
        if self.cooling.model == VISCOUS and self.n_lc:
            a[self.lc_mask] -= (self.cooling.beta
                                * self.inv_mass[self.lc_mask, None]
                                * velocities[self.lc_mask])
        elif self.cooling.model == SEMICLASSICAL and self.n_lc:
            Fl = semiclassical_force(self.cooling, self.coolant,
                                     velocities[self.lc_mask], t)
            a[self.lc_mask] += Fl * self.inv_mass[self.lc_mask, None]
        return a

    def total_acceleration(self, state, t: float | None = None) -> np.ndarray:
        """Accelerations for an ensemble state (recoil kicks excluded; those
        enter through the integrator's stochastic splitting)."""
        if t is None:
            t = state.time
        return self.accelerations(state.positions, state.velocities, t)

    # -- stochastic term -----------------------------------------------------

    def recoil_momenta(self, dt: float, rng) -> np.ndarray | None:
        """(N, 3) Gaussian momentum kicks; zero rows for sympathetic species.
        Returns None when recoil noise is off (no RNG draw)."""
        if self._recoil_sigma_coeff == 0.0 or self.n_lc == 0:
            return None
        kicks = np.zeros((self.n_particles, 3))
        sigma = self._recoil_sigma_coeff * math.sqrt(dt)
        kicks[self.lc_mask] = sigma * rng.standard_normal((self.n_lc, 3))
        return kicks

    # -- energies (conservation checks, diagnostics cross-validation) --------

    def coulomb_energy(self, positions) -> float:
        """Total pairwise Coulomb energy (J)."""
        n = positions.shape[0]
        if n == 1:
            return 0.0
        diff = positions[:, None, :] - positions[None, :, :]
        d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        iu = np.triu_indices(n, k=1)
        return float((self.qq[iu] / d[iu]).sum())

    def trap_potential_energy(self, positions, t: float = 0.0) -> float:
        """Trap potential energy (J): dc part always; in pseudo mode the
        time-averaged rf pseudopotential, in rf mode the instantaneous rf
        potential at time t."""
        x, y, z = positions[:, 0], positions[:, 1], positions[:, 2]
        gdc = self.trap.dc_gradient
        # E_dc = (x gdc/2, y gdc/2, -z gdc)  =>  phi_dc = gdc (z^2/2 - (x^2+y^2)/4)
        e = float((self.charge * gdc * (z ** 2 / 2.0 - (x ** 2 + y ** 2) / 4.0)).sum())
        if self.trap.mode == PSEUDO_MODE:
            e += float((0.5 * self.mass * self._pseudo_w2 * (x ** 2 + y ** 2)).sum())
        else:
            grf = self.trap.rf_gradient * math.cos(self.trap.omega_rf * t)
            e += float((self.charge * grf * (y ** 2 - x ** 2) / 2.0).sum())
        return e

    def total_energy(self, positions, velocities, t: float = 0.0) -> float:
        ke = float((0.5 * self.mass * np.einsum("ij,ij->i", velocities, velocities)).sum())
        return ke + self.coulomb_energy(positions) + self.trap_potential_energy(positions, t)
