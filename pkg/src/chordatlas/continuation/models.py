"""Family continuation models.

- ContinuationOptions: Step-size control and stopping rules
- AtlasRow: One accepted point of a chord family
- EventKind / FamilyEvent: Folds, degeneracies and stops located along a family
- OmegaProbe: Limit diagnostics of a family near an event
- CensusResult: Chord counts in a neighbourhood below and above an event
- FamilyAtlas: Rows, events, probes and census results of one family
"""

from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.chordatlas.chords.models import Chord


class SeedDegenerateError(ValueError):
    """Raised when continuation is started from a degenerate chord."""

    def __init__(self, mu: float, sigma_min: float, threshold: float):
        self.mu = mu
        self.sigma_min = sigma_min
        self.threshold = threshold
        super().__init__(
            f"Seed chord at mu={mu!r} is degenerate: sigma_min={sigma_min:.3e} < {threshold:.1e}"
        )


class ContinuationOptions(BaseModel):
    """Pseudo-arclength step control.

    Attributes:
        ds: Initial arclength step.
        ds_min / ds_max: Step-size bounds; reaching ds_min records a stall.
        max_steps: Accepted-step budget.
        mu_window: Optional sub-interval of mu_range to stay in.
        grow / shrink: Step factors after fast / slow or failed correctors.
        fast_iterations: Corrector iterations at or below which ds grows.
        slow_iterations: Corrector iterations at or above which ds shrinks.
        max_corrector_iter: Corrector iteration budget per step.
        fold_ds_tol / fold_mu_tol: Bisection stopping tolerances for events.
        degeneracy_threshold: sigma_min threshold for degeneracy events.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    ds: float = Field(1e-3, gt=0)
    ds_min: float = Field(1e-6, gt=0)
    ds_max: float = Field(1e-2, gt=0)
    max_steps: int = Field(500, gt=0)
    mu_window: Optional[Tuple[float, float]] = None
    grow: float = Field(1.5, gt=1)
    shrink: float = Field(0.5, gt=0, lt=1)
    fast_iterations: int = Field(2, ge=1)
    slow_iterations: int = Field(5, ge=1)
    max_corrector_iter: int = Field(8, gt=0)
    fold_ds_tol: float = Field(1e-9, gt=0)
    fold_mu_tol: float = Field(1e-10, gt=0)
    degeneracy_threshold: float = Field(1e-6, gt=0)

    @model_validator(mode="after")
    def validate_steps(self) -> "ContinuationOptions":
        if not self.ds_min <= self.ds <= self.ds_max:
            raise ValueError("ds must satisfy ds_min <= ds <= ds_max")
        if self.mu_window is not None and self.mu_window[0] > self.mu_window[1]:
            raise ValueError("mu_window must be increasing")
        return self


class AtlasRow(BaseModel):
    """One accepted family member.

    Attributes:
        index: Position along the family.
        arclength: Accumulated pseudo-arclength.
        mu: Family parameter.
        u: Start coordinates on L_0.
        tau: Period.
        action: Rabinowitz action.
        sigma_min: Nondegeneracy indicator.
        shooting_sigma_min: Column-normalized shooting-Jacobian sigma_min.
        shooting_jac_det: Shooting-Jacobian determinant.
        dmu_ds: mu-component of the oriented unit tangent.
        residual_norm: max |F| at the row.
        tangent: Oriented unit tangent in (u, tau, mu).
        flags: Free-form markers, e.g. "degenerate", "seed", "range_end".
    """

    index: int = Field(..., ge=0)
    arclength: float
    mu: float
    u: List[float]
    tau: float = Field(..., gt=0)
    action: float
    sigma_min: float
    shooting_sigma_min: float
    shooting_jac_det: float
    dmu_ds: float
    residual_norm: float
    tangent: List[float] = Field(default_factory=list)
    flags: List[str] = Field(default_factory=list)


class EventKind(str, Enum):
    """Kinds of family events."""

    FOLD = "fold"
    DEGENERACY = "degeneracy"
    CONTACT_VIOLATION = "contact_violation"
    COLLISION_STOP = "collision_stop"
    RANGE_END = "range_end"
    STALL = "stall"


class FamilyEvent(BaseModel):
    """A located event with its bracketing rows.

    Attributes:
        kind: Event kind.
        mu_estimate: Located parameter value.
        rows: Indices of the bracketing atlas rows.
        arclength_estimate: Located arclength, when refined.
        sigma_min_at_event: sigma_min at the located point.
        coincides_with_fold: A degeneracy and a fold bracket the same point.
        refined_u / refined_tau: The chord at the located point.
        detail: Free text (error messages of stops).
    """

    kind: EventKind
    mu_estimate: float
    rows: List[int] = Field(default_factory=list)
    arclength_estimate: Optional[float] = None
    sigma_min_at_event: Optional[float] = None
    coincides_with_fold: bool = False
    refined_u: Optional[List[float]] = None
    refined_tau: Optional[float] = None
    detail: Optional[str] = None


class OmegaProbe(BaseModel):
    """Limit diagnostics of a family approaching mu_infinity.

    Attributes:
        event_kind: Kind of the probed event.
        mu_infinity_estimate: The approached parameter.
        side: -1 when the branch lies below mu_infinity, +1 above.
        delta / ratio: mu_nu = mu_inf + side delta ratio^-nu.
        sample_mus: Parameters actually shot.
        pairwise_c0_distances: Surrogate distances of consecutive chords.
        contractions: Ratios of consecutive distances.
        convergence_order: log(mean contraction) / log(ratio).
        action_values: Actions of the probe chords.
        action_spread: max |A_nu - A_limit|.
        limit_u / limit_tau / limit_action: Extrapolated limit chord.
        limit_sigma_min / limit_degenerate: Nondegeneracy of the limit.
        deepest_level: Last nu that converged.
        warning: Set when refinement stopped early.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    event_kind: EventKind
    mu_infinity_estimate: float
    side: int
    delta: float
    ratio: float
    sample_mus: List[float] = Field(default_factory=list)
    pairwise_c0_distances: List[float] = Field(default_factory=list)
    contractions: List[float] = Field(default_factory=list)
    convergence_order: Optional[float] = None
    action_values: List[float] = Field(default_factory=list)
    action_spread: float = 0.0
    limit_u: List[float] = Field(default_factory=list)
    limit_tau: float = 0.0
    limit_action: float = 0.0
    limit_sigma_min: float = 0.0
    limit_degenerate: bool = False
    deepest_level: int = -1
    warning: Optional[str] = None
    limit_chord: Optional[Chord] = Field(None, exclude=True, repr=False)


class CensusResult(BaseModel):
    """Distinct chords within the neighbourhood U below and above an event."""

    mu_infinity: float
    delta: float
    radius: float
    count_below: int = Field(..., ge=0)
    count_above: int = Field(..., ge=0)
    chords_below: List[Tuple[List[float], float]] = Field(default_factory=list)
    chords_above: List[Tuple[List[float], float]] = Field(default_factory=list)
    warning: Optional[str] = None


class FamilyAtlas(BaseModel):
    """One continued family."""

    system_id: str
    direction: int = 1
    rows: List[AtlasRow] = Field(default_factory=list)
    events: List[FamilyEvent] = Field(default_factory=list)
    probes: List[OmegaProbe] = Field(default_factory=list)
    census: List[CensusResult] = Field(default_factory=list)

    @field_validator("direction")
    @classmethod
    def validate_direction(cls, v: int) -> int:
        if v not in (-1, 1):
            raise ValueError("direction must be +1 or -1")
        return v

    def events_of(self, kind: EventKind) -> List[FamilyEvent]:
        return [e for e in self.events if e.kind == kind]
