"""Chord solver models and errors.

- ShootingGuess: Lagrangian start coordinates u and period tau
- ShootingOptions: Newton and sampling controls
- Chord: A converged chord sampled on t in {0, 1/N, ..., 1}
- NondegReport: Transversality and shooting-Jacobian diagnostics
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.chordatlas.flow.models import IntegratorOptions


class ShootingError(Exception):
    """Raised when the shooting Newton iteration does not produce a chord."""

    pass


class NoConvergenceError(ShootingError):
    """Raised when Newton exhausts its iteration budget."""

    def __init__(self, iterations: int, residual: float, reason: str = ""):
        self.iterations = iterations
        self.residual = residual
        detail = f": {reason}" if reason else ""
        super().__init__(
            f"Newton did not converge after {iterations} iterations "
            f"(|F| = {residual:.3e}){detail}"
        )


class TauCollapsedError(ShootingError):
    """Raised when the period falls to the floor (the constant path)."""

    def __init__(self, tau: float, floor: float):
        self.tau = tau
        self.floor = floor
        super().__init__(f"Period collapsed: tau={tau!r} <= tau_floor={floor!r}")


class DimensionError(ValueError):
    """Raised when dH vanishes at a chord endpoint."""

    def __init__(self, endpoint: int, grad_norm: float):
        self.endpoint = endpoint
        self.grad_norm = grad_norm
        super().__init__(
            f"dH vanishes at endpoint {endpoint} (|grad H| = {grad_norm:.3e}); "
            "the endpoint is not on a regular level"
        )


class ShootingGuess(BaseModel):
    """Start coordinates on L_0 and a period guess."""

    model_config = ConfigDict(frozen=True)

    u: List[float] = Field(..., min_length=1, description="Lagrangian coordinates on L_0")
    tau: float = Field(..., description="Period guess")

    @field_validator("u", mode="before")
    @classmethod
    def coerce_u(cls, v):
        if isinstance(v, (int, float)):
            return [float(v)]
        return [float(x) for x in np.asarray(v, dtype=float).reshape(-1)]


class ShootingOptions(BaseModel):
    """Controls of the shooting Newton iteration."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    newton_tol: float = Field(1e-10, gt=0, description="Target for max |F|")
    max_iter: int = Field(50, gt=0, description="Newton iteration budget")
    tau_floor: float = Field(1e-4, gt=0, description="Smallest admissible period")
    samples: int = Field(256, ge=2, description="Chord sample intervals N")
    degeneracy_threshold: float = Field(1e-6, gt=0)
    stagnation_step: float = Field(1e-13, gt=0, description="Relative step counted as stalled")
    noise_factor: float = Field(100.0, ge=1, description="Accepted |F| multiple when stalled")
    integrator: IntegratorOptions = Field(default_factory=IntegratorOptions)


@dataclass(frozen=True, eq=False)
class Chord:
    """A solution (v, tau) of dv/dt = tau X_H(v) from L_0 to L_1.

    Attributes:
        system_id: System the chord belongs to.
        mu: Family parameter.
        tau: Period.
        u: Start coordinates on L_0.
        samples: States v(k/N), shape (N+1, 2n).
        residual_norm: max |F| of the shooting system at (u, tau).
        boundary_gap: max distance of the endpoints from their planes.
        newton_iterations: Newton steps used to converge.
        monodromy: D(phi^tau) at the start point.
    """

    system_id: str
    mu: float
    tau: float
    u: np.ndarray
    samples: np.ndarray
    residual_norm: float
    boundary_gap: float
    newton_iterations: int = 0
    monodromy: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def nodes(self) -> int:
        """Number of sample intervals N."""
        return int(self.samples.shape[0] - 1)

    @property
    def start(self) -> np.ndarray:
        return self.samples[0]

    @property
    def end(self) -> np.ndarray:
        return self.samples[-1]

    @property
    def guess(self) -> ShootingGuess:
        return ShootingGuess(u=self.u, tau=self.tau)


class NondegReport(BaseModel):
    """Nondegeneracy diagnostics of a chord.

    Attributes:
        sigma_min: min(transversality_sigma_min, shooting_sigma_min).
        transversality_sigma_min: Smallest singular value of the normalized
            [dphi T(L_0 cap Sigma) | T(L_1 cap Sigma)]; 1 when n = 1.
        shooting_sigma_min: Smallest singular value of the column-normalized
            shooting Jacobian.
        shooting_jac_det: Determinant of the (n+1)x(n+1) shooting Jacobian.
        never_tangent_margin: Normalized max |omega(X_H, u)| at start and end.
        degenerate: sigma_min < threshold.
    """

    sigma_min: float = Field(..., ge=0)
    transversality_sigma_min: float = Field(..., ge=0)
    shooting_sigma_min: float = Field(..., ge=0)
    shooting_jac_det: float
    never_tangent_margin: List[float]
    threshold: float
    degenerate: bool
