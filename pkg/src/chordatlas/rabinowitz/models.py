"""Records of the Rabinowitz action estimates.

- ActionRecord: Action of one chord and its period bounds tau/kappa, kappa*tau
- EnvelopeMember / EnvelopeReport: Family-wide exponential envelope check
- FamilyPoint: Protocol for anything carrying (mu, action, tau)
"""

from typing import List, Optional, Protocol, Tuple

from pydantic import BaseModel, Field


class ContactFailedError(ValueError):
    """Raised when an estimate needs the contact condition and it failed."""

    def __init__(self, mu: float, violations: int, sample_count: int):
        self.mu = mu
        self.violations = violations
        self.sample_count = sample_count
        super().__init__(
            f"Contact check failed at mu={mu!r} ({violations} violations, "
            f"{sample_count} accepted samples); estimate monitors are disabled"
        )


class FamilyPoint(Protocol):
    mu: float
    action: float
    tau: float


class ActionRecord(BaseModel):
    """Action of a chord checked against tau/kappa <= A <= kappa tau.

    Attributes:
        mu: Family parameter of the chord.
        action: A^H(v, tau).
        tau: Period.
        kappa_used: kappa from the contact report.
        bounds: (tau / kappa, kappa * tau).
        d_action_d_mu: Analytic dA/dmu when computed.
        passed: action within bounds up to 1e-6 (1 + |action|).
    """

    mu: float
    action: float
    tau: float = Field(..., gt=0)
    kappa_used: float = Field(..., ge=1)
    bounds: Tuple[float, float]
    d_action_d_mu: Optional[float] = None
    passed: bool


class EnvelopeMember(BaseModel):
    """Envelope verdict for one later family member."""

    mu: float
    action: float
    tau: float
    action_lower: float
    action_upper: float
    c0: float
    c1: float
    action_passed: bool
    period_passed: bool


class EnvelopeReport(BaseModel):
    """exp(+-kappa^2 dmu) action envelope and derived period bounds along a family."""

    mu_start: float
    action_start: float
    tau_start: float
    kappa: float = Field(..., ge=1)
    members: List[EnvelopeMember] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(m.action_passed and m.period_passed for m in self.members)
