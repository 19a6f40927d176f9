"""Adaptive embedded Runge-Kutta time stepping, RF-period bookkeeping, runs.

The deterministic part is a Dormand-Prince 5(4) pair with a 4th-order dense
interpolant; recoil kicks are interleaved between accepted steps at fixed
sub-period intervals (splitting), keeping the embedded error estimate valid.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from .forces import ForceField
from .model import RF_MODE, ModelError

__all__ = [
    "EnsembleState", "StepController", "PeriodSamples", "IntegrationError",
    "StiffnessError", "rk_step", "adapt_dt", "advance_one_rf_period", "run",
]


class IntegrationError(RuntimeError):
    pass


class StiffnessError(IntegrationError):
    """Error control wants a step below dt_min."""


@dataclass
class EnsembleState:
    """Positions/velocities of all particles at one instant plus the RNG
    stream that owns this run's stochastic kicks."""

    time: float
    positions: np.ndarray      # (N, 3) m
    velocities: np.ndarray     # (N, 3) m/s
    species_index: np.ndarray  # (N,) into the scenario species table
    rng: np.random.Generator

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=float)
        self.species_index = np.asarray(self.species_index, dtype=np.intp)
        n = self.species_index.size
        if self.positions.shape != (n, 3) or self.velocities.shape != (n, 3):
            raise ModelError("positions/velocities must be (N, 3) arrays")

    @property
    def n_particles(self) -> int:
        return self.species_index.size

    def copy(self) -> "EnsembleState":
        """Array copy; the RNG stream stays shared with the original."""
        return EnsembleState(self.time, self.positions.copy(),
                             self.velocities.copy(), self.species_index, self.rng)


@dataclass(frozen=True)
class StepController:
    """Proportional step-size control for the embedded 5(4) pair."""

    rel_tol: float = 1e-9
    abs_tol_position: float = 1e-12   # m
    abs_tol_velocity: float = 1e-6    # m/s
    dt_min: float = 0.0
    dt_max: float = math.inf
    safety: float = 0.9
    min_shrink: float = 0.2
    max_growth: float = 5.0

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_max):
            raise ModelError("need 0 < dt_min <= dt_max")
        if self.rel_tol <= 0 or self.abs_tol_position <= 0 or self.abs_tol_velocity <= 0:
            raise ModelError("tolerances must be positive")

    @classmethod
    def for_trap(cls, trap, rel_tol=1e-9, abs_tol_position=1e-12,
                 abs_tol_velocity=1e-6, safety=0.9) -> "StepController":
        """Defaults bound to the trap: in rf mode dt_max is one tenth of the
        rf period so micromotion is always resolved; the pseudopotential has
        no drive to resolve, so its cap is looser."""
        T = trap.rf_period
        dt_max = T / 10.0 if trap.mode == RF_MODE else 5.0 * T
        return cls(rel_tol=rel_tol, abs_tol_position=abs_tol_position,
                   abs_tol_velocity=abs_tol_velocity,
                   dt_min=T * 1e-9, dt_max=dt_max, safety=safety)


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# y5 - y4 weights (error estimate)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# dense-output weights (4th-order continuous extension)
_D = (-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
      -10690763975 / 1880347072, 701980252875 / 199316789632,
      -1453857185 / 822651844, 69997945 / 29380423)

_ORDER_EXP = -1.0 / 5.0  # 4th-order error estimator


class _DP5:
    """One ensemble's stepping workspace (flat state vector + FSAL cache)."""

    def __init__(self, field: ForceField, controller: StepController):
        self.field = field
        self.ctrl = controller
        n = field.n_particles
        self.n = n
        sc = np.empty(6 * n)
        sc[:3 * n] = controller.abs_tol_position
        sc[3 * n:] = controller.abs_tol_velocity
        self._abs = sc

    def deriv(self, t, y):
        n = self.n
        pos = y[:3 * n].reshape(n, 3)
        vel = y[3 * n:].reshape(n, 3)
        acc = self.field.accelerations(pos, vel, t)
        out = np.empty_like(y)
        out[:3 * n] = y[3 * n:]
        out[3 * n:] = acc.ravel()
        return out

    def attempt(self, t, y, dt, k1=None):
        """One trial step: returns (y_new, err_ratio, ks)."""
        if k1 is None:
            k1 = self.deriv(t, y)
        k = [k1]
        for i in range(1, 7):
            yi = y + dt * sum(a * kj for a, kj in zip(_A[i], k))
            k.append(self.deriv(t + _C[i] * dt, yi))
        y_new = yi  # stage 7 argument is the 5th-order solution (FSAL)
        err = dt * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
        if not np.all(np.isfinite(y_new)):
            raise IntegrationError(
                f"non-finite state after step at t = {t:.6e} s, dt = {dt:.3e} s")
        scale = self._abs + self.ctrl.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = math.sqrt(float(np.mean((err / scale) ** 2)))
        return y_new, ratio, k

    @staticmethod
    def dense(y_old, y_new, k, dt, theta):
        """Interpolated state at t_old + theta*dt, theta in [0, 1]."""
        ydiff = y_new - y_old
        bspl = dt * k[0] - ydiff
        r4 = ydiff - dt * k[6] - bspl
        r5 = dt * sum(d * kj for d, kj in zip(_D, k) if d != 0.0)
        th = theta
        return y_old + th * (ydiff + (1.0 - th) * (bspl + th * (r4 + (1.0 - th) * r5)))


def rk_step(state: EnsembleState, field: ForceField, dt: float,
            controller: StepController | None = None):
    """One deterministic embedded 5(4) step of size dt (no step control).

    Returns ``(new_state, error_ratio)`` where error_ratio is the embedded
    error estimate in units of the controller tolerance (accept <=> <= 1).
    """
    if dt <= 0:
        raise ModelError("dt must be positive")
    if controller is None:
        controller = StepController(dt_min=dt, dt_max=dt)
    stepper = _DP5(field, controller)
    n = state.n_particles
    y = np.concatenate([state.positions.ravel(), state.velocities.ravel()])
    y_new, ratio, _ = stepper.attempt(state.time, y, dt)
    new = EnsembleState(state.time + dt, y_new[:3 * n].reshape(n, 3),
                        y_new[3 * n:].reshape(n, 3), state.species_index, state.rng)
    return new, ratio


def adapt_dt(controller: StepController, error_ratio: float, dt: float):
    """Accept/reject a step and propose the next size.

    ``error_ratio`` is the tolerance-normalized error from ``rk_step``.
    """
    if error_ratio == 0.0:
        factor = controller.max_growth
    elif math.isfinite(error_ratio):
        factor = controller.safety * error_ratio ** _ORDER_EXP
        factor = min(max(factor, controller.min_shrink), controller.max_growth)
    else:
        factor = controller.min_shrink
    accept = error_ratio <= 1.0
    if not accept:
        factor = min(factor, 1.0)
        if dt <= controller.dt_min * (1.0 + 1e-12):
            raise StiffnessError(
                f"step control wants dt below dt_min = {controller.dt_min:.3e} s")
    dt_next = min(max(dt * factor, controller.dt_min), controller.dt_max)
    return accept, dt_next


@dataclass
class PeriodSamples:
    """Velocity/position samples at M uniform phases of one rf period, plus
    the end-of-period snapshot."""

    t_start: float
    period: float
    velocities: np.ndarray      # (M, N, 3)
    positions: np.ndarray       # (M, N, 3)
    end_positions: np.ndarray   # (N, 3)
    end_velocities: np.ndarray  # (N, 3)

    @property
    def n_samples(self) -> int:
        return self.velocities.shape[0]

    @property
    def mean_velocities(self) -> np.ndarray:
        return self.velocities.mean(axis=0)

    @property
    def mean_positions(self) -> np.ndarray:
        return self.positions.mean(axis=0)


# recoil kicks are interleaved at most this fraction of an rf period apart
KICK_INTERVAL_FRACTION = 1 / 20
DEFAULT_PHASE_SAMPLES = 32


def _integrate_to(stepper, t, y, t_target, dt, k1, sample_times, si, pos_out, vel_out):
    """Advance y from t to exactly t_target, filling dense samples on the way.

    Returns (y, dt_hint, k1, si).  Times land on t_target exactly: the last
    step uses dt = t_target - t and the clock is assigned, not accumulated.
    """
    ctrl = stepper.ctrl
    n3 = 3 * stepper.n
    while t < t_target:
        dt = min(max(dt, ctrl.dt_min), ctrl.dt_max)
        remaining = t_target - t
        last = dt >= remaining
        dt_try = remaining if last else dt
        y_new, ratio, k = stepper.attempt(t, y, dt_try, k1)
        accept, dt_next = adapt_dt(ctrl, ratio, dt_try)
        if not accept:
            dt = dt_next
            continue
        t_new = t_target if last else t + dt_try
        while si < len(sample_times) and sample_times[si] <= t_new:
            theta = (sample_times[si] - t) / dt_try
            ys = stepper.dense(y, y_new, k, dt_try, theta)
            pos_out[si] = ys[:n3].reshape(-1, 3)
            vel_out[si] = ys[n3:].reshape(-1, 3)
            si += 1
        y = y_new
        k1 = k[6]  # FSAL
        t = t_new
        dt = dt_next
    return y, dt, k1, si


def advance_one_rf_period(state: EnsembleState, field: ForceField,
                          controller: StepController,
                          n_samples: int = DEFAULT_PHASE_SAMPLES,
                          dt_hint: float | None = None):
    """Integrate exactly one rf period, returning the new state, the phase
    samples for diagnostics, and the step-size hint for the next period.

    In pseudo mode a nominal period of the same duration is used.  When
    recoil noise is active, kicks are applied between deterministic steps at
    uniform sub-intervals of the period (stochastic splitting).
    """
    if n_samples < 16:
        raise ModelError("need at least 16 phase samples per period")
    T = field.trap.rf_period
    if field.trap.mode == RF_MODE and controller.dt_max > T / 10.0 * (1 + 1e-12):
        raise ModelError("controller dt_max must not exceed one tenth of the rf period")
    n = state.n_particles
    t0 = state.time
    t_end = t0 + T
    sample_times = t0 + (T / n_samples) * np.arange(n_samples)
    pos_out = np.empty((n_samples, n, 3))
    vel_out = np.empty((n_samples, n, 3))
    pos_out[0] = state.positions
    vel_out[0] = state.velocities
    si = 1

    stepper = _DP5(field, controller)
    y = np.concatenate([state.positions.ravel(), state.velocities.ravel()])
    dt = dt_hint if dt_hint is not None else controller.dt_max / 4.0
    k1 = None

    if field.has_recoil_noise:
        n_sub = int(round(1.0 / KICK_INTERVAL_FRACTION))
        dt_kick = T / n_sub
        inv_m = field.inv_mass[:, None]
        t_cur = t0
        for i in range(1, n_sub + 1):
            tb = t_end if i == n_sub else t0 + dt_kick * i
            y, dt, k1, si = _integrate_to(stepper, t_cur, y, tb, dt, k1,
                                          sample_times, si, pos_out, vel_out)
            kicks = field.recoil_momenta(dt_kick, state.rng)
            y[3 * n:] += (kicks * inv_m).ravel()
            k1 = None  # velocity jump invalidates the FSAL cache
            t_cur = tb
    else:
        y, dt, k1, si = _integrate_to(stepper, t0, y, t_end, dt, k1,
                                      sample_times, si, pos_out, vel_out)
    if si != n_samples:
        raise IntegrationError("internal error: phase samples not exhausted")

    end_pos = y[:3 * n].reshape(n, 3).copy()
    end_vel = y[3 * n:].reshape(n, 3).copy()
    new_state = EnsembleState(t_end, end_pos, end_vel, state.species_index, state.rng)
    samples = PeriodSamples(t0, T, vel_out, pos_out, end_pos, end_vel)
    return new_state, samples, dt


class UnstableScenarioError(RuntimeError):
    def __init__(self, report):
        super().__init__("scenario has unstable species:\n" + "\n".join(report.lines()))
        self.report = report


def _emit(sinks, method, *args, **kwargs):
    for sink in sinks:
        fn = getattr(sink, method, None)
        if fn is not None:
            fn(*args, **kwargs)


def run(config, sinks=(), *, controller: StepController | None = None,
        workers: int = 1, allow_unstable: bool = False, progress=None) -> EnsembleState:
    """Run a scenario for its configured number of rf periods.

    After every period a DiagnosticsRecord goes to the sinks (respecting the
    record cadence); snapshots follow their own cadence plus one final
    snapshot.  A fixed seed gives bit-identical outputs in canonical
    single-worker mode.  Partial outputs are flushed before an abort.
    """
    from . import scenario as _scenario
    from .model import stability_report

    report = stability_report(config.species_list, config.trap)
    if not report.all_stable and not allow_unstable:
        raise UnstableScenarioError(report)

    rng = np.random.default_rng(config.seed)
    state = _scenario.init_ensemble(config, rng)
    field = ForceField(config.trap, config.species_list, config.cooling,
                       state.species_index, workers=workers)
    if controller is None:
        controller = StepController.for_trap(config.trap)
    dcfg = config.diagnostics
    names = [sp.name for sp in config.species_list]
    window_pos = deque(maxlen=dcfg.window)
    window_t = deque(maxlen=dcfg.window)

    def current_window():
        if not window_pos:
            return None
        return diag.TrajectoryWindow(np.asarray(window_t), np.stack(window_pos))

    # period-0 record: degenerate single-phase sample of the initial state
    samples0 = PeriodSamples(state.time, field.trap.rf_period,
                             state.velocities[None], state.positions[None],
                             state.positions, state.velocities)
    _emit(sinks, "on_record",
          diag.make_record(state.time, samples0, field, None, dcfg.thresholds))

    dt_hint = None
    try:
        for period in range(1, config.duration + 1):
            state, samples, dt_hint = advance_one_rf_period(
                state, field, controller, dcfg.phase_samples, dt_hint)
            window_pos.append(samples.mean_positions)
            window_t.append(state.time)
            record = None
            if period % dcfg.cadence == 0 or period == config.duration:
                record = diag.make_record(state.time, samples, field,
                                          current_window(), dcfg.thresholds)
                _emit(sinks, "on_record", record)
            if dcfg.snapshot_every and period % dcfg.snapshot_every == 0:
                win = current_window()
                _emit(sinks, "on_snapshot", period, state, names,
                      win.window_mean if win is not None else None)
            if progress is not None:
                progress(period, config.duration, record)
    except Exception:
        win = current_window()
        _emit(sinks, "on_snapshot", -1, state, names,
              win.window_mean if win is not None else None)
        _emit(sinks, "close")
        raise

    win = current_window()
    if config.duration > 0 and not (dcfg.snapshot_every
                                    and config.duration % dcfg.snapshot_every == 0):
        _emit(sinks, "on_snapshot", config.duration, state, names,
              win.window_mean if win is not None else None)
    if win is not None and win.n_periods >= dcfg.thresholds.min_window_periods:
        _emit(sinks, "on_structure",
              diag.classify_structure(win, state.species_index,
                                      config.species_list, dcfg.thresholds))
    _emit(sinks, "close")
    return state
