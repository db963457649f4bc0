"""Data models and errors of the flow engine.

- IntegratorOptions: Tolerances and guards for the adaptive integrator
- FlowResult: Sampled trajectory with optional monodromy and sensitivities
- IntegrationError and its subclasses
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class IntegrationError(Exception):
    """Raised when an integration cannot be completed."""

    pass


class StepSizeUnderflowError(IntegrationError):
    """Raised when the adaptive step size collapses below machine resolution."""

    def __init__(self, t: float, message: str):
        self.t = t
        super().__init__(f"Step size underflow at t={t!r}: {message}")


class CollisionFloorError(IntegrationError):
    """Raised when a trajectory comes closer to a singularity than the floor."""

    def __init__(self, t: float, distance: float, floor: float):
        self.t = t
        self.distance = distance
        self.floor = floor
        super().__init__(
            f"Collision floor breached at t={t!r}: distance {distance:.3e} < floor {floor:.3e}"
        )


class NonFiniteStateError(IntegrationError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, t: float):
        self.t = t
        super().__init__(f"Non-finite state at t={t!r}")


class IntegratorOptions(BaseModel):
    """Options of the embedded Runge-Kutta 5(4) integrator."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rtol: float = Field(1e-10, gt=0, description="Relative tolerance per step")
    atol: float = Field(1e-12, gt=0, description="Absolute tolerance per step")
    collision_floor: float = Field(1e-3, gt=0, description="Minimum singularity distance")
    max_step: float = Field(np.inf, gt=0, description="Largest allowed step")


@dataclass(frozen=True, eq=False)
class FlowResult:
    """Trajectory of the Hamiltonian flow.

    Attributes:
        times: Sample times, strictly increasing, times[0] = 0.
        states: Samples, shape (len(times), 2n).
        monodromy: D(phi^t) at the final time, when variational equations ran.
        sensitivity: d(phi^t)/d(mu) at the final time, when requested.
        steps_accepted: Accepted integrator steps.
        steps_rejected: Rejected step attempts.
        max_h_drift: max |H(x(t)) - H(x(0))| over steps and samples.
        symplectic_defect: max |M^T J M - J| when monodromy is present.
        sample_monodromies: D(phi^t) at every sample time, when variational
            equations ran.
    """

    times: np.ndarray
    states: np.ndarray
    monodromy: Optional[np.ndarray]
    sensitivity: Optional[np.ndarray]
    steps_accepted: int
    steps_rejected: int
    max_h_drift: float
    symplectic_defect: Optional[float] = None
    sample_monodromies: Optional[np.ndarray] = None

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t_final(self) -> float:
        return float(self.times[-1])
