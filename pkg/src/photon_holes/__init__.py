"""Simulation of entangled photon holes made by two-photon interference.

A weak coherent pulse and HOM-bunched down-conversion pairs meet on a
beam splitter; at the destructive relative phase the equal-time
coincidences vanish while each output beam stays nearly Poissonian.
"""

from photon_holes.analysis import fit_sinusoid, g2_zero, visibility_from_peaks
from photon_holes.apparatus import FransonConfig, chsh_S, hole_state, idealized_tpa
from photon_holes.detection import DetectorConfig, TacHistogram
from photon_holes.experiments import ExperimentConfig, Mode, Scenario, ScenarioResult, phase_scan, run_scenario
from photon_holes.fock import FockState, ModeLabel, apply_beam_splitter, apply_phase
from photon_holes.sources import PulseTrainConfig, SourceParams, matched_alpha

__version__ = "0.1.0"

__all__ = [
    "DetectorConfig",
    "ExperimentConfig",
    "FockState",
    "FransonConfig",
    "Mode",
    "ModeLabel",
    "PulseTrainConfig",
    "Scenario",
    "ScenarioResult",
    "SourceParams",
    "TacHistogram",
    "apply_beam_splitter",
    "apply_phase",
    "chsh_S",
    "fit_sinusoid",
    "g2_zero",
    "hole_state",
    "idealized_tpa",
    "matched_alpha",
    "phase_scan",
    "run_scenario",
    "visibility_from_peaks",
]
