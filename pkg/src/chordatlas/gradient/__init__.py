"""Discretized gradient flow of the Rabinowitz action.

- flow / relax: Negative gradient flow with a parameter schedule
- stretching_experiment: beta_R runs over several R
- energy_identity_defect / energy_bound: Energy monitors
"""

from src.chordatlas.gradient.cutoff import beta_r, cutoff_support, fixed_beta, gamma
from src.chordatlas.gradient.descent import (
    Reduction,
    energy_bound,
    energy_identity_defect,
    flow,
    path_distance,
    path_from_chord,
    relax,
)
from src.chordatlas.gradient.models import (
    CutoffProfile,
    DivergenceError,
    EnergyBoundReport,
    FlowError,
    FlowOptions,
    FlowPath,
    FlowTrajectory,
    Schedule,
    SigmaFloorError,
    StretchReport,
)
from src.chordatlas.gradient.stretching import stretch_once, stretching_experiment

__all__ = [
    # Models
    "CutoffProfile",
    "EnergyBoundReport",
    "FlowOptions",
    "FlowPath",
    "FlowTrajectory",
    "Schedule",
    "StretchReport",
    # Errors
    "FlowError",
    "SigmaFloorError",
    "DivergenceError",
    # Cutoffs
    "gamma",
    "beta_r",
    "fixed_beta",
    "cutoff_support",
    # Flow
    "Reduction",
    "flow",
    "relax",
    "path_from_chord",
    "path_distance",
    "energy_identity_defect",
    "energy_bound",
    # Stretching
    "stretch_once",
    "stretching_experiment",
]
