"""Independent reference implementations used by the test suite only.

Nothing here shares stepping logic with the production integrator: the
integrators below are fixed-step classic RK4 written against the equations
directly, so agreement between the two paths is meaningful evidence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .model import CONSTANTS, Species, TrapConfig


class OracleError(RuntimeError):
    pass


def trap_mathieu_parameters(species: Species, trap: TrapConfig) -> tuple[float, float]:
    """(a, q) of the radial Mathieu equation u'' + (a - 2q cos 2tau) u = 0.

    The x axis has (a, +q); the y axis sees the rf term with opposite sign,
    i.e. (a, -q), which has the identical stability region.
    """
    qm = species.charge_to_mass
    a = -2.0 * qm * trap.dc_gradient / trap.omega_rf ** 2
    q = 2.0 * qm * trap.rf_gradient / trap.omega_rf ** 2
    return a, q


def _mathieu_monodromy(a: float, q: float, steps: int) -> np.ndarray:
    """Monodromy matrix of u'' + (a - 2q cos 2tau) u = 0 over tau in [0, pi],
    fixed-step RK4, columns from the two canonical initial conditions."""
    h = math.pi / steps

    def acc(tau, u):
        return -(a - 2.0 * q * math.cos(2.0 * tau)) * u

    cols = []
    for u0, v0 in ((1.0, 0.0), (0.0, 1.0)):
        u, v = u0, v0
        tau = 0.0
        for i in range(steps):
            k1u = v
            k1v = acc(tau, u)
            k2u = v + 0.5 * h * k1v
            k2v = acc(tau + 0.5 * h, u + 0.5 * h * k1u)
            k3u = v + 0.5 * h * k2v
            k3v = acc(tau + 0.5 * h, u + 0.5 * h * k2u)
            k4u = v + h * k3v
            k4v = acc(tau + h, u + h * k3u)
            u += (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            tau = (i + 1) * h
        cols.append((u, v))
    return np.array(cols).T


@dataclass(frozen=True)
class FloquetResult:
    trace_x: float   # monodromy trace for (a, +q)
    trace_y: float   # monodromy trace for (a, -q)
    stable: bool

    @property
    def traces(self) -> tuple[float, float]:
        return self.trace_x, self.trace_y


def floquet_stability(a: float, q: float, steps: int = 10000) -> FloquetResult:
    """Floquet stability of the two transverse Mathieu axes: stable iff the
    monodromy trace magnitude is below 2 for both."""
    tx = float(np.trace(_mathieu_monodromy(a, q, steps)))
    ty = float(np.trace(_mathieu_monodromy(a, -q, steps)))
    return FloquetResult(tx, ty, abs(tx) < 2.0 and abs(ty) < 2.0)


def rf_period_monodromy(species: Species, trap: TrapConfig,
                        steps: int = 10000) -> tuple[np.ndarray, np.ndarray]:
    """Real-time one-rf-period monodromy matrices (M_x, M_y) acting on
    (x, xdot) states; used to build exact cycle-to-cycle invariants."""
    a, q = trap_mathieu_parameters(species, trap)
    # scale tau-derivatives back to real time: x' = (2/Omega) xdot
    S = np.array([[1.0, 0.0], [0.0, 2.0 / trap.omega_rf]])
    Sinv = np.array([[1.0, 0.0], [0.0, trap.omega_rf / 2.0]])
    Mx = Sinv @ _mathieu_monodromy(a, q, steps) @ S
    My = Sinv @ _mathieu_monodromy(a, -q, steps) @ S
    return Mx, My


def single_ion_reference(trap: TrapConfig, species: Species, x0, v0,
                         duration: float, steps_per_period: int = 10000,
                         samples_per_period: int = 1):
    """Fixed-step RK4 trajectory of one ion in the rf-mode trap field.

    Returns (times, positions, velocities) sampled ``samples_per_period``
    times per rf period plus the final point.  Deliberately re-implements the
    field expression; shares nothing with the adaptive integrator.
    """
    qm = species.charge_to_mass
    grf = trap.rf_gradient
    gdc = trap.dc_gradient
    omega = trap.omega_rf
    T = trap.rf_period
    n_periods = duration / T
    total_steps = int(round(n_periods * steps_per_period))
    if total_steps < 1:
        raise OracleError("duration shorter than one step")
    h = duration / total_steps
    stride = max(1, steps_per_period // samples_per_period)

    def acc(t, x, y, z):
        c = grf * math.cos(omega * t)
        return (qm * (c + gdc / 2.0) * x,
                qm * (-c + gdc / 2.0) * y,
                -qm * gdc * z)

    x, y, z = (float(x0[0]), float(x0[1]), float(x0[2]))
    vx, vy, vz = (float(v0[0]), float(v0[1]), float(v0[2]))
    times, pos, vel = [0.0], [(x, y, z)], [(vx, vy, vz)]
    t = 0.0
    for i in range(total_steps):
        ax1, ay1, az1 = acc(t, x, y, z)
        x2, y2, z2 = x + 0.5 * h * vx, y + 0.5 * h * vy, z + 0.5 * h * vz
        vx2, vy2, vz2 = vx + 0.5 * h * ax1, vy + 0.5 * h * ay1, vz + 0.5 * h * az1
        ax2, ay2, az2 = acc(t + 0.5 * h, x2, y2, z2)
        x3, y3, z3 = x + 0.5 * h * vx2, y + 0.5 * h * vy2, z + 0.5 * h * vz2
        vx3, vy3, vz3 = vx + 0.5 * h * ax2, vy + 0.5 * h * ay2, vz + 0.5 * h * az2
        ax3, ay3, az3 = acc(t + 0.5 * h, x3, y3, z3)
        x4, y4, z4 = x + h * vx3, y + h * vy3, z + h * vz3
        vx4, vy4, vz4 = vx + h * ax3, vy + h * ay3, vz + h * az3
        ax4, ay4, az4 = acc(t + h, x4, y4, z4)
        x += (h / 6.0) * (vx + 2.0 * vx2 + 2.0 * vx3 + vx4)
        y += (h / 6.0) * (vy + 2.0 * vy2 + 2.0 * vy3 + vy4)
        z += (h / 6.0) * (vz + 2.0 * vz2 + 2.0 * vz3 + vz4)
        vx += (h / 6.0) * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
        vy += (h / 6.0) * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4)
        vz += (h / 6.0) * (az1 + 2.0 * az2 + 2.0 * az3 + az4)
        t = (i + 1) * h
        if (i + 1) % stride == 0 or i + 1 == total_steps:
            times.append(t)
            pos.append((x, y, z))
            vel.append((vx, vy, vz))
    return np.asarray(times), np.asarray(pos), np.asarray(vel)


def two_ion_spacing_analytic(omega_z: float, charge: float, mass: float) -> float:
    """d^3 = Q^2 / (2 pi eps0 m omega_z^2)."""
    return (charge ** 2 / (2.0 * math.pi * CONSTANTS.vacuum_permittivity
                           * mass * omega_z ** 2)) ** (1.0 / 3.0)


def two_ion_equilibrium(omega_z: float, charge: float, mass: float) -> float:
    """Equilibrium spacing of two equal ions on the axis, from numerical
    minimization of the total potential, cross-checked against the closed
    form."""
    if omega_z <= 0:
        raise OracleError("omega_z must be positive")
    k = CONSTANTS.coulomb * charge ** 2

    def total_potential(d):
        # ions at +-d/2: axial potential energy + Coulomb repulsion
        return 0.25 * mass * omega_z ** 2 * d ** 2 + k / d

    d0 = two_ion_spacing_analytic(omega_z, charge, mass)
    res = minimize_scalar(total_potential, bounds=(d0 * 1e-2, d0 * 1e2),
                          method="bounded",
                          options={"xatol": d0 * 1e-12})
    d_num = float(res.x)
    if abs(d_num - d0) > 1e-6 * d0:
        raise OracleError(
            f"numeric spacing {d_num:.9e} m disagrees with closed form {d0:.9e} m")
    return d_num


def langevin_equilibrium(beta: float, t_min: float, mass: float,
                         duration: float, rng: np.random.Generator,
                         dt: float | None = None) -> float:
    """Stationary temperature of one free particle under viscous damping plus
    fluctuation-dissipation kicks, via the exact Ornstein-Uhlenbeck update.

    Averages start after five relaxation times m/beta.
    """
    tau = mass / beta
    if duration < 6.0 * tau:
        raise OracleError("duration must exceed several relaxation times")
    if dt is None:
        dt = tau / 50.0
    decay = math.exp(-beta * dt / mass)
    sigma = math.sqrt(CONSTANTS.boltzmann * t_min / mass * (1.0 - decay ** 2))
    steps = int(round(duration / dt))
    settle = int(round(5.0 * tau / dt))
    v = np.zeros(3)
    acc_v2 = 0.0
    n_acc = 0
    for i in range(steps):
        v = decay * v + sigma * rng.standard_normal(3)
        if i >= settle:
            acc_v2 += float(v @ v)
            n_acc += 1
    if n_acc == 0:
        raise OracleError("no samples after settling window")
    return mass * (acc_v2 / n_acc) / (3.0 * CONSTANTS.boltzmann)
