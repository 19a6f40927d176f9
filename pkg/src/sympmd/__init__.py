"""Molecular dynamics of sympathetic cooling and crystallization of ions in a
linear rf trap."""

from .diagnostics import (DiagnosticsRecord, StructureReport,
                          StructureThresholds, TrajectoryWindow)
from .forces import CoolingConfig, ForceField
from .integrator import (EnsembleState, PeriodSamples, StepController,
                         advance_one_rf_period, rk_step, run)
from .model import (CONSTANTS, PhysicalConstants, Species, StabilityReport,
                    TrapConfig, Transition, compute_q, pseudopotential_energy,
                    secular_frequencies, stability_report)
from .scenario import (ScenarioConfig, init_ensemble, parse_scenario, preset,
                       render_scenario)

__version__ = "0.1.0"
