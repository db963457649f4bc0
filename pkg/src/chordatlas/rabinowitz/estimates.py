"""Contact-type estimates for chord actions.

- action_bounds_check: tau/kappa <= A <= kappa tau for one chord
- action_mu_derivative: dA/dmu = -tau int H'_mu(v) dt against re-shot differences
- family_action_envelope: exp(+-kappa^2 dmu) envelope and period bounds

All monitors are gated on a passing contact check; with contact failing the
sign of the action is unconstrained and ContactFailedError is raised.
"""

import logging
import math
from typing import Optional, Sequence, Tuple

from src.chordatlas.chords.models import Chord, ShootingOptions
from src.chordatlas.chords.shooting import shoot
from src.chordatlas.events.metrics import get_metrics
from src.chordatlas.phase.models import ContactReport, SystemDescriptor
from src.chordatlas.rabinowitz.functional import action, h_prime_mean
from src.chordatlas.rabinowitz.models import (
    ActionRecord,
    ContactFailedError,
    EnvelopeMember,
    EnvelopeReport,
    FamilyPoint,
)

logger = logging.getLogger(__name__)

# Relative slack of every monitor: tol * (1 + |value|)
MONITOR_TOLERANCE = 1e-6


def _require_contact(report: ContactReport) -> None:
    if not report.passed:
        raise ContactFailedError(report.mu, report.violation_count, report.sample_count)


def _slack(value: float) -> float:
    return MONITOR_TOLERANCE * (1.0 + abs(value))


def action_bounds_check(
    sys: SystemDescriptor,
    chord: Chord,
    contact: ContactReport,
    d_action_d_mu: Optional[float] = None,
) -> ActionRecord:
    """Check tau/kappa <= A(v, tau) <= kappa tau with kappa from the report.

    Raises:
        ContactFailedError: The contact report has violations or too few samples.
    """
    _require_contact(contact)
    value = action(sys, chord)
    kappa = contact.kappa
    lower, upper = chord.tau / kappa, kappa * chord.tau
    slack = _slack(value)
    passed = lower - slack <= value <= upper + slack
    get_metrics().record_monitor("action_bounds", passed)
    if not passed:
        logger.warning(
            "Action outside contact bounds",
            extra={
                "system_id": sys.system_id,
                "mu": chord.mu,
                "action": value,
                "lower": lower,
                "upper": upper,
            },
        )
    return ActionRecord(
        mu=chord.mu,
        action=value,
        tau=chord.tau,
        kappa_used=kappa,
        bounds=(lower, upper),
        d_action_d_mu=d_action_d_mu,
        passed=passed,
    )


def action_mu_derivative(
    sys: SystemDescriptor,
    chord: Chord,
    dmu: float = 1e-5,
    opts: Optional[ShootingOptions] = None,
) -> Tuple[float, float]:
    """Return (analytic, finite-difference) dA/dmu at a family member.

    The analytic value is -tau times the mean of H'_mu along the chord. The
    difference quotient re-shoots at mu +- dmu from the chord itself; near
    an end of mu_range a one-sided quotient is used.

    Raises:
        NoConvergenceError: Re-shooting failed.
    """
    if dmu <= 0:
        raise ValueError("dmu must be positive")
    analytic = -chord.tau * h_prime_mean(sys, chord)

    opts = opts or ShootingOptions(samples=chord.nodes)
    lo, hi = sys.mu_range
    mu_plus = chord.mu + dmu if chord.mu + dmu <= hi else chord.mu
    mu_minus = chord.mu - dmu if chord.mu - dmu >= lo else chord.mu
    if mu_plus == mu_minus:
        raise ValueError("mu_range too narrow for the requested dmu")

    def action_at(mu: float) -> float:
        if mu == chord.mu:
            return action(sys, chord)
        return action(sys, shoot(sys, mu, chord.guess, opts))

    finite = (action_at(mu_plus) - action_at(mu_minus)) / (mu_plus - mu_minus)
    logger.debug(
        "Action derivative",
        extra={"system_id": sys.system_id, "mu": chord.mu, "analytic": analytic, "fd": finite},
    )
    return analytic, finite


def family_action_envelope(
    members: Sequence[FamilyPoint],
    contacts: Sequence[ContactReport],
    kappa_margin: float = 0.05,
) -> EnvelopeReport:
    """Check later members against the envelope anchored at members[0].

    kappa is the largest sampled kappa (and sup |H'_mu|) over the reports,
    inflated by kappa_margin since sampling underestimates the true value.
    With dmu = |mu - mu_a|:

        exp(-k^2 dmu) A_a <= A <= exp(k^2 dmu) A_a
        c0 = exp(-k^2 dmu) tau_a / k^2 <= tau <= c1 = k^2 exp(k^2 dmu) tau_a

    Raises:
        ContactFailedError: Any report failed.
        ValueError: No members, or A_a <= 0.
    """
    if not members:
        raise ValueError("envelope needs at least one member")
    if not contacts:
        raise ValueError("envelope needs contact reports for the segment")
    for report in contacts:
        _require_contact(report)
    anchor = members[0]
    if anchor.action <= 0:
        raise ValueError(f"envelope anchor needs positive action, got {anchor.action!r}")

    kappa = max(max(r.kappa for r in contacts), max(r.dh_dmu_max for r in contacts), 1.0)
    kappa *= 1.0 + kappa_margin
    k2 = kappa * kappa
    metrics = get_metrics()

    report = EnvelopeReport(
        mu_start=anchor.mu, action_start=anchor.action, tau_start=anchor.tau, kappa=kappa
    )
    for member in members[1:]:
        growth = math.exp(k2 * abs(member.mu - anchor.mu))
        lower, upper = anchor.action / growth, anchor.action * growth
        c0, c1 = anchor.tau / (growth * k2), k2 * growth * anchor.tau
        slack = _slack(member.action)
        action_ok = lower - slack <= member.action <= upper + slack
        period_ok = c0 - _slack(member.tau) <= member.tau <= c1 + _slack(member.tau)
        metrics.record_monitor("action_envelope", action_ok and period_ok)
        if not (action_ok and period_ok):
            logger.warning(
                "Family member outside action envelope",
                extra={"mu": member.mu, "action": member.action, "tau": member.tau},
            )
        report.members.append(
            EnvelopeMember(
                mu=member.mu,
                action=member.action,
                tau=member.tau,
                action_lower=lower,
                action_upper=upper,
                c0=c0,
                c1=c1,
                action_passed=action_ok,
                period_passed=period_ok,
            )
        )
    return report
