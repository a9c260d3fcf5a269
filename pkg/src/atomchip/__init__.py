"""Magnetic atom-chip conveyor simulator.

Computes magnetostatic fields of lithographic wire patterns plus uniform
bias fields, characterizes the resulting chain of Ioffe-Pritchard
microtraps, simulates classical transport of thermal atom ensembles in the
phase-driven moving potential, and models the unification of two traps
with phase-space-density accounting.
"""

__version__ = "0.1.0"

from . import constants
from .constants import AtomState, RB87
from .geometry import ChipLayout, Conductor, Filament, RibbonSegment, conveyor_layout
from .fields import BiasField, ChipScene, CurrentSet, FieldModel, guide_estimates
from .waveforms import DriveConfig, PhaseProfile, conveyor_currents, h2_current
from .trapping import TrapCharacterization, WellChain, find_minimum, well_chain
from .dynamics import Ensemble, TransportReport, sample_thermal, integrate, transport_experiment
from .merging import MergePhaseMap, PsdReport, merge_phase_map, psd_closed_form, septum_prediction

__all__ = [
    "AtomState",
    "BiasField",
    "ChipLayout",
    "ChipScene",
    "Conductor",
    "CurrentSet",
    "DriveConfig",
    "Ensemble",
    "FieldModel",
    "Filament",
    "MergePhaseMap",
    "PhaseProfile",
    "PsdReport",
    "RB87",
    "RibbonSegment",
    "TransportReport",
    "TrapCharacterization",
    "WellChain",
    "constants",
    "conveyor_currents",
    "conveyor_layout",
    "find_minimum",
    "guide_estimates",
    "h2_current",
    "integrate",
    "merge_phase_map",
    "psd_closed_form",
    "sample_thermal",
    "septum_prediction",
    "transport_experiment",
    "well_chain",
]
