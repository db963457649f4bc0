"""Chord-family continuation and limit diagnostics.

- continue_family: Pseudo-arclength continuation in (u, tau, mu)
- detect_events: Fold and degeneracy location
- omega_probe / limit_census: Behaviour of a family at its limit
"""

from src.chordatlas.continuation.arclength import (
    CurvePoint,
    continue_family,
    correct,
    family_jacobian,
    row_point,
    unit_tangent,
)
from src.chordatlas.continuation.events import contact_events, detect_events
from src.chordatlas.continuation.models import (
    AtlasRow,
    CensusResult,
    ContinuationOptions,
    EventKind,
    FamilyAtlas,
    FamilyEvent,
    OmegaProbe,
    SeedDegenerateError,
)
from src.chordatlas.continuation.omega import (
    aitken_limit,
    census_guesses,
    omega_probe,
    limit_census,
    verify_rows,
)

__all__ = [
    # Models
    "AtlasRow",
    "CensusResult",
    "ContinuationOptions",
    "EventKind",
    "FamilyAtlas",
    "FamilyEvent",
    "OmegaProbe",
    "CurvePoint",
    # Errors
    "SeedDegenerateError",
    # Continuation
    "continue_family",
    "correct",
    "family_jacobian",
    "row_point",
    "unit_tangent",
    # Events
    "detect_events",
    "contact_events",
    # Limits
    "omega_probe",
    "limit_census",
    "census_guesses",
    "aitken_limit",
    "verify_rows",
]
