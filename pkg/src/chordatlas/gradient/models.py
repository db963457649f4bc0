"""Gradient-flow models.

- FlowOptions: Scheme, step control and stopping rules
- CutoffProfile / Schedule: mu(s) = mu0 + beta(s) (mu1 - mu0)
- FlowPath: A state (w, sigma) of the flow at time s with running totals
- FlowTrajectory: Snapshots and stop reason of one flow
- StretchReport: Outcome of one beta_R run
- EnergyBoundReport: Energy against 2 (mu1 - mu0) kappa c
"""

from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.chordatlas.gradient.cutoff import beta_r, cutoff_support, fixed_beta


class FlowError(Exception):
    """Raised when a gradient flow cannot continue."""

    pass


class SigmaFloorError(FlowError):
    """Raised when sigma falls to the floor."""

    def __init__(self, s: float, sigma: float, floor: float):
        self.s = s
        self.sigma = sigma
        self.floor = floor
        super().__init__(f"sigma={sigma:.3e} reached the floor {floor:.1e} at s={s:.6g}")


class DivergenceError(FlowError):
    """Raised when the flow state blows up or turns non-finite."""

    def __init__(self, s: float, norm: float):
        self.s = s
        self.norm = norm
        super().__init__(f"Flow diverged at s={s:.6g} (state norm {norm:.3e})")


class FlowOptions(BaseModel):
    """Gradient-flow controls.

    Attributes:
        scheme: "split" (spectrally split, linearly implicit) or "descent"
            (explicit steepest descent).
        ds: Step where the schedule varies; defaults to 0.05 for split and
            1e-3 for descent.
        relax_ds: Split-scheme step where beta is locally constant.
        tol: Gradient-norm convergence threshold.
        s_settle: Flow time allowed after the schedule ends.
        max_steps: Accepted-step budget.
        min_ds: Backtracking floor; a step refused below it stops the flow.
        sigma_floor: Smallest admissible sigma.
        rho: Radius of the ball around the start; leaving it stops the flow.
        divergence_norm: State norm treated as a blow-up.
        snapshot_every: Accepted steps between snapshots.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    scheme: Literal["split", "descent"] = "split"
    ds: Optional[float] = Field(None, gt=0)
    relax_ds: float = Field(10.0, gt=0)
    tol: float = Field(1e-8, gt=0)
    s_settle: float = Field(100.0, ge=0)
    max_steps: int = Field(20000, gt=0)
    min_ds: float = Field(1e-10, gt=0)
    sigma_floor: float = Field(1e-4, gt=0)
    rho: Optional[float] = Field(None, gt=0)
    divergence_norm: float = Field(1e8, gt=0)
    snapshot_every: int = Field(1, ge=1)

    @property
    def step(self) -> float:
        if self.ds is not None:
            return self.ds
        return 0.05 if self.scheme == "split" else 1e-3


class CutoffProfile(BaseModel):
    """beta(s) of a schedule.

    kind "none" is beta = 0, "fixed" is fixed_beta(T) and "stretch" is
    beta_R(R).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["none", "fixed", "stretch"] = "none"
    T: Optional[float] = Field(None, gt=0)
    R: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def validate_kind(self) -> "CutoffProfile":
        if self.kind == "fixed" and self.T is None:
            raise ValueError("fixed cutoff needs T")
        if self.kind == "stretch" and self.R is None:
            raise ValueError("stretch cutoff needs R")
        return self

    @classmethod
    def stretch(cls, R: float) -> "CutoffProfile":
        return cls(kind="stretch", R=R)

    @classmethod
    def fixed(cls, T: float) -> "CutoffProfile":
        return cls(kind="fixed", T=T)

    def __call__(self, s: float) -> float:
        if self.kind == "fixed":
            return fixed_beta(self.T, s)
        if self.kind == "stretch":
            return beta_r(self.R, s)
        return 0.0

    @property
    def support(self) -> Tuple[float, float]:
        """[s_start, s_end] outside of which beta vanishes."""
        if self.kind == "none":
            return 0.0, 0.0
        return cutoff_support(self.kind, self.T if self.kind == "fixed" else self.R)

    @property
    def peak(self) -> float:
        """max beta."""
        if self.kind == "none":
            return 0.0
        if self.kind == "stretch":
            return min(self.R, 1.0)
        return 1.0


class Schedule(BaseModel):
    """Parameter schedule mu(s) = mu0 + beta(s) (mu1 - mu0)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu0: float
    mu1: float
    profile: CutoffProfile = Field(default_factory=CutoffProfile)

    @classmethod
    def constant(cls, mu: float) -> "Schedule":
        return cls(mu0=mu, mu1=mu)

    def mu_at(self, s: float) -> float:
        beta = self.profile(s)
        if beta == 0.0:
            return self.mu0
        return self.mu0 + beta * (self.mu1 - self.mu0)

    @property
    def s_start(self) -> float:
        return self.profile.support[0]

    @property
    def s_end(self) -> float:
        return self.profile.support[1]

    def locally_constant(self, s: float, h: float) -> bool:
        """beta agrees at s, s + h/2 and s + h."""
        if self.mu0 == self.mu1:
            return True
        b = self.profile(s)
        return self.profile(s + 0.5 * h) == b and self.profile(s + h) == b


@dataclass(eq=False)
class FlowPath:
    """Flow state y = (w, sigma) at time s.

    Attributes:
        w: Path nodes, shape (N+1, 2n); w[0] on L_0 and w[N] on L_1.
        sigma: Period variable.
        s: Flow time.
        mu: mu(s).
        action: Discrete action at (w, sigma, mu).
        gradient_norm: Norm of the discrete gradient.
        energy_so_far: sum of |grad A|^2 ds over accepted steps.
        source_so_far: sum of the explicit s-dependence A(y, s') - A(y, s).
    """

    w: np.ndarray
    sigma: float
    s: float
    mu: float
    action: float
    gradient_norm: float
    energy_so_far: float = 0.0
    source_so_far: float = 0.0

    @property
    def nodes(self) -> int:
        return int(self.w.shape[0] - 1)


@dataclass(eq=False)
class FlowTrajectory:
    """Snapshots of one flow, first and last state included.

    stop_reason is "converged", "s_max", "max_steps", "stalled" or "escaped".
    """

    schedule: Schedule
    scheme: str
    snapshots: List[FlowPath] = field(default_factory=list)
    steps: int = 0
    rejected: int = 0
    stop_reason: str = ""

    @property
    def initial(self) -> FlowPath:
        return self.snapshots[0]

    @property
    def final(self) -> FlowPath:
        return self.snapshots[-1]

    @property
    def energy(self) -> float:
        return self.final.energy_so_far


@dataclass(eq=False)
class StretchReport:
    """Result of one beta_R flow.

    Attributes:
        R: Stretching parameter.
        outcome: "converged" (the plateau reached a critical point at mu1),
            "parked" (it did not) or "escaped" (the flow left the rho-ball).
        plateau_min_gradient: Smallest gradient norm while beta was at its peak.
        plateau_state: The state attaining it.
        energy: Total discrete energy.
        distance_to_target: Surrogate distance of plateau_state to the target chord.
        trajectory: The flow itself.
    """

    R: float
    outcome: Literal["converged", "parked", "escaped"]
    plateau_min_gradient: float
    plateau_state: Optional[FlowPath]
    energy: float
    distance_to_target: Optional[float]
    trajectory: FlowTrajectory = field(repr=False)


class EnergyBoundReport(BaseModel):
    """E <= (1 + margin) 2 (mu1 - mu0) kappa c + max(0, A_start - A_end)."""

    energy: float
    kappa: float
    c: float
    bound: float
    action_drop: float
    margin: float
    passed: bool
