"""Chord solver: Newton shooting and the nondegeneracy test.

- shoot / multi_start_shoot / scan_guesses: Find chords
- nondegeneracy: Transversality and shooting-Jacobian diagnostics
- reparametrize_to_period: Physical-time view of a chord
"""

from src.chordatlas.chords.models import (
    Chord,
    DimensionError,
    NoConvergenceError,
    NondegReport,
    ShootingError,
    ShootingGuess,
    ShootingOptions,
    TauCollapsedError,
)
from src.chordatlas.chords.nondegeneracy import nondegeneracy
from src.chordatlas.chords.reparam import PeriodTrajectory, reparametrize_to_period, to_unit_interval
from src.chordatlas.chords.shooting import (
    ShootingEvaluation,
    build_chord,
    chord_distance,
    distinct_chords,
    evaluate_shooting,
    level_start,
    multi_start_shoot,
    newton_solve,
    scan_guesses,
    shoot,
    shooting_jacobian,
    shooting_residual,
    start_point,
)

__all__ = [
    # Models
    "Chord",
    "ShootingGuess",
    "ShootingOptions",
    "NondegReport",
    "PeriodTrajectory",
    "ShootingEvaluation",
    # Errors
    "ShootingError",
    "NoConvergenceError",
    "TauCollapsedError",
    "DimensionError",
    # Shooting
    "shoot",
    "newton_solve",
    "build_chord",
    "evaluate_shooting",
    "shooting_residual",
    "shooting_jacobian",
    "start_point",
    "level_start",
    "multi_start_shoot",
    "scan_guesses",
    "chord_distance",
    "distinct_chords",
    # Diagnostics
    "nondegeneracy",
    "reparametrize_to_period",
    "to_unit_interval",
]
