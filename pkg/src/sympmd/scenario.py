"""Scenario configuration: file format, built-in presets, initial conditions.

Scenario files are sectioned key-value text ('#' comments).  All physics keys
carry their unit in the name (mass_amu, omega_rf_mhz, ...); parsing converts
to SI once and everything downstream stays SI.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import StructureThresholds
from .forces import (NO_COOLING, SEMICLASSICAL, VISCOUS, CoolingConfig,
                     validate_cooling)
from .model import (CONSTANTS, LASER_COOLED, SYMPATHETIC, ModelError, Species,
                    TrapConfig, mhz_to_rad_per_s, rad_per_s_to_mhz)

MIN_SEPARATION = 2.0e-6  # m, enforced between initial positions


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class SpeciesCount:
    species: Species
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ScenarioError(f"species {self.species.name!r}: count must be >= 1")


@dataclass(frozen=True)
class InitConfig:
    temperature: float = 5.0                       # K
    semi_axes: tuple[float, float, float] = (50e-6, 50e-6, 200e-6)  # m
    min_separation: float = MIN_SEPARATION         # m

    def __post_init__(self):
        if self.temperature < 0:
            raise ScenarioError("initial temperature must be non-negative")
        if self.temperature > 300.0:
            raise ScenarioError("initial temperature above room temperature")
        if any(a <= 0 for a in self.semi_axes):
            raise ScenarioError("placement semi-axes must be positive")


@dataclass(frozen=True)
class DiagnosticsConfig:
    cadence: int = 1              # record every n-th rf period
    window: int = 50              # rf periods in the structure window
    snapshot_every: int = 0       # 0: final snapshot only
    phase_samples: int = 32       # velocity samples per rf period
    thresholds: StructureThresholds = field(default_factory=StructureThresholds)

    def __post_init__(self):
        if self.cadence < 1 or self.window < 1 or self.phase_samples < 16:
            raise ScenarioError("bad diagnostics settings")
        if self.snapshot_every < 0:
            raise ScenarioError("snapshot_every must be >= 0")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    trap: TrapConfig
    species: tuple[SpeciesCount, ...]
    cooling: CoolingConfig
    duration: int                 # rf periods
    seed: int
    init: InitConfig = field(default_factory=InitConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output_dir: str | None = None

    def __post_init__(self):
        if self.duration < 0:
            raise ScenarioError("duration must be >= 0")
        if not self.species:
            raise ScenarioError("need at least one species")
        names = [sc.species.name for sc in self.species]
        if len(set(names)) != len(names):
            raise ScenarioError("duplicate species names")
        coolants = [sc for sc in self.species if sc.species.role == LASER_COOLED]
        if len(coolants) > 1:
            raise ScenarioError("at most one laser-cooled species")
        cooling_active = (self.cooling.model != NO_COOLING
                          or self.cooling.recoil_noise)
        if cooling_active and not coolants:
            raise ScenarioError("cooling configured but no laser-cooled species")
        validate_cooling(self.cooling,
                         coolants[0].species if coolants else None)

    @property
    def species_list(self) -> tuple[Species, ...]:
        return tuple(sc.species for sc in self.species)

    @property
    def n_particles(self) -> int:
        return sum(sc.count for sc in self.species)

    def with_overrides(self, *, duration=None, seed=None, cooling=None,
                       trap=None, init=None, diagnostics=None) -> "ScenarioConfig":
        cfg = self
        if duration is not None:
            cfg = replace(cfg, duration=duration)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if cooling is not None:
            cfg = replace(cfg, cooling=cooling)
        if trap is not None:
            cfg = replace(cfg, trap=trap)
        if init is not None:
            cfg = replace(cfg, init=init)
        if diagnostics is not None:
            cfg = replace(cfg, diagnostics=diagnostics)
        return cfg


# ------------------------------------------------------------------ presets

def _be() -> Species:
    # 2s-2p cooling transition of 9Be+
    return Species.from_amu_e("Be+", 9.012, 1, LASER_COOLED,
                              wavelength=313e-9,
                              linewidth=mhz_to_rad_per_s(19.6))


def _ba() -> Species:
    # 6s-6p (493 nm) cooling transition of 137Ba+
    return Species.from_amu_e("Ba+", 136.91, 1, LASER_COOLED,
                              wavelength=493e-9,
                              linewidth=mhz_to_rad_per_s(15.1))


_FIG1_TRAP = dict(omega_rf_mhz=8.5, rf_gradient_v_per_mm2=17.6,
                  dc_gradient_v_per_cm2=30.0)
_FIG2_TRAP = dict(omega_rf_mhz=1.6, rf_gradient_v_per_mm2=23.8)


def _preset_fig1(name, n_lc, n_sc) -> ScenarioConfig:
    return ScenarioConfig(
        name=name,
        trap=TrapConfig.from_drive(**_FIG1_TRAP),
        species=(SpeciesCount(_be(), n_lc),
                 SpeciesCount(Species.from_amu_e("HD+", 3.021, 1, SYMPATHETIC), n_sc)),
        cooling=CoolingConfig(model=VISCOUS, beta=2.4e-22, recoil_noise=True),
        duration=20000, seed=1,
        init=InitConfig(temperature=2.0, semi_axes=(40e-6, 40e-6, 120e-6)),
        diagnostics=DiagnosticsConfig(snapshot_every=500))


def _preset_fig2(name, dc_v_per_cm2) -> ScenarioConfig:
    mol = Species.from_amu_e("mol20000", 20000.0, 20, SYMPATHETIC)
    return ScenarioConfig(
        name=name,
        trap=TrapConfig.from_drive(dc_gradient_v_per_cm2=dc_v_per_cm2, **_FIG2_TRAP),
        species=(SpeciesCount(_ba(), 30), SpeciesCount(mol, 10)),
        cooling=CoolingConfig(model=VISCOUS, beta=4.8e-22, recoil_noise=True),
        duration=24000, seed=1,
        init=InitConfig(temperature=20.0, semi_axes=(60e-6, 60e-6, 400e-6)),
        diagnostics=DiagnosticsConfig(snapshot_every=500))


def _preset_mass_series(name, mass_amu, charge_e) -> ScenarioConfig:
    mol = Species.from_amu_e(f"mol{int(mass_amu)}", mass_amu, charge_e, SYMPATHETIC)
    return ScenarioConfig(
        name=name,
        trap=TrapConfig.from_drive(dc_gradient_v_per_cm2=12.0, **_FIG2_TRAP),
        species=(SpeciesCount(_ba(), 30), SpeciesCount(mol, 10)),
        cooling=CoolingConfig(model=VISCOUS, beta=4.8e-22, recoil_noise=True),
        duration=24000, seed=1,
        init=InitConfig(temperature=20.0, semi_axes=(60e-6, 60e-6, 400e-6)),
        diagnostics=DiagnosticsConfig(snapshot_every=500))


def _preset_light(name, mol_name, mass_amu, omega_rf_mhz) -> ScenarioConfig:
    return ScenarioConfig(
        name=name,
        trap=TrapConfig.from_drive(omega_rf_mhz=omega_rf_mhz,
                                   rf_gradient_v_per_mm2=17.6,
                                   dc_gradient_v_per_cm2=30.0),
        species=(SpeciesCount(_be(), 20),
                 SpeciesCount(Species.from_amu_e(mol_name, mass_amu, 1, SYMPATHETIC), 5)),
        cooling=CoolingConfig(model=VISCOUS, beta=2.4e-22, recoil_noise=True),
        duration=20000, seed=1,
        init=InitConfig(temperature=2.0, semi_axes=(40e-6, 40e-6, 120e-6)),
        diagnostics=DiagnosticsConfig(snapshot_every=500))


def _preset_rhodamine() -> ScenarioConfig:
    # trap constructed (not in any caption) so that q(Ba+) ~ 0.30 and
    # q(R6G+) ~ 0.08, inside the preferred window
    r6g = Species.from_amu_e("R6G+", 493.0, 1, SYMPATHETIC)
    return ScenarioConfig(
        name="rhodamine",
        trap=TrapConfig.from_drive(omega_rf_mhz=2.0, rf_gradient_v_per_mm2=33.6,
                                   dc_gradient_v_per_cm2=8.0),
        species=(SpeciesCount(_ba(), 20), SpeciesCount(r6g, 5)),
        cooling=CoolingConfig(model=VISCOUS, beta=4.8e-22, recoil_noise=True),
        duration=20000, seed=1,
        init=InitConfig(temperature=2.0, semi_axes=(60e-6, 60e-6, 250e-6)),
        diagnostics=DiagnosticsConfig(snapshot_every=500))


_PRESETS = {
    "fig1": lambda: _preset_fig1("fig1", 20, 5),
    "fig1-partial": lambda: _preset_fig1("fig1-partial", 40, 10),
    "rhodamine": _preset_rhodamine,
    "fig2b": lambda: _preset_fig2("fig2b", 12.0),
    "fig2c": lambda: _preset_fig2("fig2c", 3.0),
    "h2": lambda: _preset_light("h2", "H2+", 2.016, 10.5),
    "dt": lambda: _preset_light("dt", "DT+", 5.030, 8.5),
    "m2000": lambda: _preset_mass_series("m2000", 2000.0, 2),
    "m5000": lambda: _preset_mass_series("m5000", 5000.0, 5),
    "m10000": lambda: _preset_mass_series("m10000", 10000.0, 10),
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str) -> ScenarioConfig:
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}") from None
    return factory()


# ------------------------------------------------------------ file parsing

_TRAP_KEYS = {"omega_rf_mhz", "rf_gradient_v_per_mm2", "dc_gradient_v_per_cm2", "mode"}
_SPECIES_KEYS = {"mass_amu", "charge_e", "count", "role", "wavelength_nm",
                 "linewidth_mhz"}
_COOLING_KEYS = {"model", "beta_kg_per_s", "enhancement", "saturation",
                 "scan_period_rf_periods", "detuning_start_linewidths",
                 "beam_direction", "recoil_noise", "t_min_k"}
_RUN_KEYS = {"duration_rf_periods", "seed", "name", "output_dir"}
_INIT_KEYS = {"temperature_k", "semi_axes_um", "min_separation_um"}
_DIAG_KEYS = {"cadence_rf_periods", "window_rf_periods",
              "snapshot_every_rf_periods", "phase_samples",
              "crystallization_rms_fraction", "string_radial_fraction"}


def _key_line(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if stripped.startswith(key) and stripped[len(key):].lstrip().startswith("="):
            return i
    return None


class _SectionReader:
    def __init__(self, text, section, items, allowed):
        self.text = text
        self.section = section
        self.items = dict(items)
        unknown = set(self.items) - allowed
        if unknown:
            key = sorted(unknown)[0]
            raise ScenarioError(self._msg(key, "unknown key"))

    def _msg(self, key, what):
        line = _key_line(self.text, key)
        at = f" (line {line})" if line else ""
        return f"[{self.section}] {key}: {what}{at}"

    def get(self, key, default=None, required=False):
        if key not in self.items:
            if required:
                raise ScenarioError(f"[{self.section}] missing required key {key!r}")
            return default
        return self.items[key]

    def get_float(self, key, default=None, required=False):
        raw = self.get(key, None, required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ScenarioError(self._msg(key, f"not a number: {raw!r}")) from None

    def get_int(self, key, default=None, required=False):
        raw = self.get(key, None, required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ScenarioError(self._msg(key, f"not an integer: {raw!r}")) from None

    def get_bool(self, key, default=False):
        raw = self.get(key)
        if raw is None:
            return default
        low = raw.strip().lower()
        if low in ("on", "true", "yes", "1"):
            return True
        if low in ("off", "false", "no", "0"):
            return False
        raise ScenarioError(self._msg(key, f"expected on/off, got {raw!r}"))

    def get_triple(self, key, default=None):
        raw = self.get(key)
        if raw is None:
            return default
        parts = raw.split()
        if len(parts) != 3:
            raise ScenarioError(self._msg(key, "expected three numbers"))
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise ScenarioError(self._msg(key, f"not numbers: {raw!r}")) from None


def parse_scenario(text: str, name: str = "scenario") -> ScenarioConfig:
    """Parse and fully validate a scenario file (see the format in README)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"syntax error: {exc}") from None

    sections = set(cp.sections())
    known = {"trap", "cooling", "run", "init", "diagnostics"}
    for sec in sections:
        if sec not in known and not sec.startswith("species."):
            raise ScenarioError(f"unknown section [{sec}]")
    if "trap" not in sections:
        raise ScenarioError("missing [trap] section")

    tr = _SectionReader(text, "trap", cp.items("trap"), _TRAP_KEYS)
    mode = tr.get("mode", "rf")
    try:
        trap = TrapConfig.from_drive(
            tr.get_float("omega_rf_mhz", required=True),
            tr.get_float("rf_gradient_v_per_mm2", required=True),
            tr.get_float("dc_gradient_v_per_cm2", required=True),
            mode=mode)
    except ModelError as exc:
        raise ScenarioError(f"[trap] {exc}") from None

    species_counts = []
    for sec in cp.sections():
        if not sec.startswith("species."):
            continue
        sp_name = sec[len("species."):]
        if not sp_name:
            raise ScenarioError("species section needs a name: [species.<name>]")
        sr = _SectionReader(text, sec, cp.items(sec), _SPECIES_KEYS)
        role = sr.get("role", SYMPATHETIC)
        if role not in (LASER_COOLED, SYMPATHETIC):
            raise ScenarioError(sr._msg("role", f"unknown role {role!r}"))
        wl_nm = sr.get_float("wavelength_nm")
        lw_mhz = sr.get_float("linewidth_mhz")
        try:
            sp = Species.from_amu_e(
                sp_name,
                sr.get_float("mass_amu", required=True),
                sr.get_float("charge_e", required=True),
                role,
                wavelength=None if wl_nm is None else wl_nm * 1e-9,
                linewidth=None if lw_mhz is None else mhz_to_rad_per_s(lw_mhz))
            species_counts.append(SpeciesCount(sp, sr.get_int("count", required=True)))
        except (ModelError, ScenarioError) as exc:
            raise ScenarioError(f"[{sec}] {exc}") from None
    if not species_counts:
        raise ScenarioError("need at least one [species.<name>] section")

    coolant = next((sc.species for sc in species_counts
                    if sc.species.role == LASER_COOLED), None)

    cooling = CoolingConfig()
    if "cooling" in sections:
        cr = _SectionReader(text, "cooling", cp.items("cooling"), _COOLING_KEYS)
        model = cr.get("model", NO_COOLING)
        if model not in (VISCOUS, SEMICLASSICAL, NO_COOLING):
            raise ScenarioError(cr._msg("model", f"unknown model {model!r}"))
        scan_periods = cr.get_float("scan_period_rf_periods", 100.0)
        det_lw = cr.get_float("detuning_start_linewidths", -10.0)
        detuning_start = 0.0
        scan_period = 0.0
        if model == SEMICLASSICAL:
            if coolant is None or coolant.transition is None:
                raise ScenarioError(
                    "[cooling] semiclassical model needs a laser-cooled species "
                    "with transition data")
            detuning_start = det_lw * coolant.transition.linewidth
            scan_period = scan_periods * trap.rf_period
        try:
            cooling = CoolingConfig(
                model=model,
                beta=cr.get_float("beta_kg_per_s", 0.0),
                enhancement=cr.get_float("enhancement", 8.0),
                saturation=cr.get_float("saturation", 1.0),
                scan_period=scan_period,
                detuning_start=detuning_start,
                beam_direction=cr.get_triple(
                    "beam_direction", CoolingConfig().beam_direction),
                recoil_noise=cr.get_bool("recoil_noise", False),
                t_min=cr.get_float("t_min_k"))
        except ModelError as exc:
            raise ScenarioError(f"[cooling] {exc}") from None

    duration, seed = 1000, 1
    run_name = name
    output_dir = None
    if "run" in sections:
        rr = _SectionReader(text, "run", cp.items("run"), _RUN_KEYS)
        duration = rr.get_int("duration_rf_periods", 1000)
        if duration < 1:
            raise ScenarioError(rr._msg("duration_rf_periods", "must be >= 1"))
        seed = rr.get_int("seed", 1)
        run_name = rr.get("name", name)
        output_dir = rr.get("output_dir")

    init = InitConfig()
    if "init" in sections:
        ir = _SectionReader(text, "init", cp.items("init"), _INIT_KEYS)
        semi_um = ir.get_triple("semi_axes_um", (50.0, 50.0, 200.0))
        try:
            init = InitConfig(
                temperature=ir.get_float("temperature_k", 5.0),
                semi_axes=tuple(a * 1e-6 for a in semi_um),
                min_separation=ir.get_float("min_separation_um", 2.0) * 1e-6)
        except ScenarioError as exc:
            raise ScenarioError(f"[init] {exc}") from None

    diagnostics = DiagnosticsConfig()
    if "diagnostics" in sections:
        dr = _SectionReader(text, "diagnostics", cp.items("diagnostics"), _DIAG_KEYS)
        defaults = StructureThresholds()
        thresholds = StructureThresholds(
            crystallization_rms_fraction=dr.get_float(
                "crystallization_rms_fraction", defaults.crystallization_rms_fraction),
            string_radial_fraction=dr.get_float(
                "string_radial_fraction", defaults.string_radial_fraction),
            min_window_periods=dr.get_int("window_rf_periods", defaults.min_window_periods))
        try:
            diagnostics = DiagnosticsConfig(
                cadence=dr.get_int("cadence_rf_periods", 1),
                window=dr.get_int("window_rf_periods", 50),
                snapshot_every=dr.get_int("snapshot_every_rf_periods", 0),
                phase_samples=dr.get_int("phase_samples", 32),
                thresholds=thresholds)
        except ScenarioError as exc:
            raise ScenarioError(f"[diagnostics] {exc}") from None

    try:
        return ScenarioConfig(name=run_name, trap=trap,
                              species=tuple(species_counts), cooling=cooling,
                              duration=duration, seed=seed, init=init,
                              diagnostics=diagnostics, output_dir=output_dir)
    except (ModelError, ScenarioError) as exc:
        raise ScenarioError(str(exc)) from None


def _display(si_value: float, conv, parse=None) -> float:
    """Display value whose parse reproduces si_value bitwise.

    ``parse`` is the exact computation the file parser applies (defaults to
    multiplication by ``conv``); the value is nudged by one ulp if needed so
    the round trip is exact.
    """
    if parse is None:
        parse = lambda d: d * conv  # noqa: E731
    d = si_value / conv
    if parse(d) == si_value:
        return d
    for nd in (math.nextafter(d, math.inf), math.nextafter(d, -math.inf)):
        if parse(nd) == si_value:
            return nd
    return d


def render_scenario(config: ScenarioConfig) -> str:
    """Scenario file text; parse_scenario(render_scenario(c)) == c."""
    out = io.StringIO()
    w = out.write
    w(f"# scenario: {config.name}\n")
    w("[trap]\n")
    t = config.trap
    w(f"omega_rf_mhz = {_display(t.omega_rf, 2.0 * math.pi * 1e6, mhz_to_rad_per_s)!r}\n")
    w(f"rf_gradient_v_per_mm2 = {_display(t.rf_gradient, 1e6)!r}\n")
    w(f"dc_gradient_v_per_cm2 = {_display(t.dc_gradient, 1e4)!r}\n")
    w(f"mode = {t.mode}\n")
    for sc in config.species:
        sp = sc.species
        w(f"\n[species.{sp.name}]\n")
        w(f"mass_amu = {_display(sp.mass, CONSTANTS.atomic_mass_unit)!r}\n")
        w(f"charge_e = {_display(sp.charge, CONSTANTS.elementary_charge)!r}\n")
        w(f"count = {sc.count}\n")
        w(f"role = {sp.role}\n")
        if sp.transition is not None:
            w(f"wavelength_nm = {_display(sp.transition.wavelength, 1e-9)!r}\n")
            w(f"linewidth_mhz = {_display(sp.transition.linewidth, 2.0 * math.pi * 1e6, mhz_to_rad_per_s)!r}\n")
    c = config.cooling
    w("\n[cooling]\n")
    w(f"model = {c.model}\n")
    if c.model == VISCOUS:
        w(f"beta_kg_per_s = {c.beta!r}\n")
    if c.model == SEMICLASSICAL:
        w(f"enhancement = {c.enhancement!r}\n")
        w(f"saturation = {c.saturation!r}\n")
        w(f"scan_period_rf_periods = {_display(c.scan_period, config.trap.rf_period)!r}\n")
        coolant = next(sc.species for sc in config.species
                       if sc.species.role == LASER_COOLED)
        w(f"detuning_start_linewidths = "
          f"{_display(c.detuning_start, coolant.transition.linewidth)!r}\n")
        w(f"beam_direction = {c.beam_direction[0]!r} {c.beam_direction[1]!r} "
          f"{c.beam_direction[2]!r}\n")
    w(f"recoil_noise = {'on' if c.recoil_noise else 'off'}\n")
    if c.t_min is not None:
        w(f"t_min_k = {c.t_min!r}\n")
    w("\n[run]\n")
    w(f"name = {config.name}\n")
    w(f"duration_rf_periods = {config.duration}\n")
    w(f"seed = {config.seed}\n")
    if config.output_dir is not None:
        w(f"output_dir = {config.output_dir}\n")
    i = config.init
    w("\n[init]\n")
    w(f"temperature_k = {i.temperature!r}\n")
    w(f"semi_axes_um = {_display(i.semi_axes[0], 1e-6)!r} "
      f"{_display(i.semi_axes[1], 1e-6)!r} {_display(i.semi_axes[2], 1e-6)!r}\n")
    w(f"min_separation_um = {_display(i.min_separation, 1e-6)!r}\n")
    d = config.diagnostics
    w("\n[diagnostics]\n")
    w(f"cadence_rf_periods = {d.cadence}\n")
    w(f"window_rf_periods = {d.window}\n")
    w(f"snapshot_every_rf_periods = {d.snapshot_every}\n")
    w(f"phase_samples = {d.phase_samples}\n")
    w(f"crystallization_rms_fraction = {d.thresholds.crystallization_rms_fraction!r}\n")
    w(f"string_radial_fraction = {d.thresholds.string_radial_fraction!r}\n")
    return out.getvalue()


# ------------------------------------------------------- initial conditions

def init_ensemble(config: ScenarioConfig, rng: np.random.Generator):
    """Initial state: positions uniform in the placement ellipsoid with a
    minimum pairwise separation (rejection sampling), velocities
    Maxwell-Boltzmann at the configured temperature."""
    from .integrator import EnsembleState  # deferred: integrator imports us

    n_total = config.n_particles
    species_index = np.concatenate([
        np.full(sc.count, s, dtype=np.intp)
        for s, sc in enumerate(config.species)])
    semi = np.asarray(config.init.semi_axes)
    min_sep = config.init.min_separation

    positions = np.empty((n_total, 3))
    placed = 0
    attempts = 0
    max_attempts = 10000 * n_total
    while placed < n_total:
        if attempts >= max_attempts:
            raise ScenarioError(
                f"could not place {n_total} particles at >= {min_sep * 1e6:.1f} um "
                "separation; enlarge the [init] placement region")
        attempts += 1
        u = rng.uniform(-1.0, 1.0, 3)
        if u @ u > 1.0:
            continue
        cand = u * semi
        if placed:
            d2 = ((positions[:placed] - cand) ** 2).sum(axis=1)
            if d2.min() < min_sep ** 2:
                continue
        positions[placed] = cand
        placed += 1

    velocities = np.zeros((n_total, 3))
    if config.init.temperature > 0.0:
        masses = np.array([sc.species.mass for sc in config.species])[species_index]
        sigma = np.sqrt(CONSTANTS.boltzmann * config.init.temperature / masses)
        velocities = sigma[:, None] * rng.standard_normal((n_total, 3))

    return EnsembleState(0.0, positions, velocities, species_index, rng)
