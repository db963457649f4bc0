"""Location of folds and degeneracies along a continued family.

- Fold: the mu component of the tangent changes sign between two rows.
- Degeneracy: the shooting-Jacobian determinant changes sign, or sigma_min
  dips below the threshold without a sign change.

Sign changes are bisected in the local arclength from the earlier row
until the bracket is shorter than fold_ds_tol and its mu values agree to
fold_mu_tol. A fold is always also a zero of the determinant; such pairs
are flagged coincides_with_fold.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.chordatlas.chords.models import ShootingError, ShootingOptions
from src.chordatlas.chords.nondegeneracy import nondegeneracy
from src.chordatlas.chords.shooting import build_chord
from src.chordatlas.continuation.arclength import CurvePoint, correct, family_jacobian, row_point
from src.chordatlas.continuation.models import (
    ContinuationOptions,
    EventKind,
    FamilyAtlas,
    FamilyEvent,
)
from src.chordatlas.events.emitter import EventEmitter, EventSinkType, create_event_emitter
from src.chordatlas.events.models import EventType, RunEvent
from src.chordatlas.flow.models import IntegrationError
from src.chordatlas.phase.models import ContactReport, SystemDescriptor

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 80

# Corrector steps past tolerance at a refined event point
REFINED_POLISH_STEPS = 3

# Refined events closer than this in arclength are the same point
COINCIDENCE_ARCLENGTH = 1e-6


def _sign(value: float) -> int:
    return 1 if value > 0 else -1 if value < 0 else 0


def _bisect(
    sys: SystemDescriptor,
    atlas: FamilyAtlas,
    i: int,
    indicator: Callable[[CurvePoint], float],
    sign_a: int,
    opts: ContinuationOptions,
    shooting: ShootingOptions,
) -> Optional[Tuple[CurvePoint, float]]:
    """Bisect a sign change of indicator between rows i and i+1.

    Returns the point at the midpoint of the final bracket and its local
    arclength, or None when a corrector fails inside the bracket.
    """
    left, right = atlas.rows[i], atlas.rows[i + 1]
    z0 = row_point(left)
    t0 = np.asarray(left.tangent, dtype=float)
    a, b = 0.0, right.arclength - left.arclength
    mu_a, mu_b = left.mu, right.mu
    try:
        for _ in range(MAX_BISECTIONS):
            if b - a < opts.fold_ds_tol and abs(mu_b - mu_a) < opts.fold_mu_tol:
                break
            mid = 0.5 * (a + b)
            point = correct(sys, z0, t0, mid, opts, shooting)
            if _sign(indicator(point)) == sign_a:
                a, mu_a = mid, float(point.z[-1])
            else:
                b, mu_b = mid, float(point.z[-1])
        mid = 0.5 * (a + b)
        return correct(sys, z0, t0, mid, opts, shooting, REFINED_POLISH_STEPS), left.arclength + mid
    except (ShootingError, IntegrationError) as e:
        logger.warning(
            "Event refinement failed",
            extra={"system_id": sys.system_id, "row": i, "error_message": str(e)},
        )
        return None


def _jacobian_det(sys: SystemDescriptor, shooting: ShootingOptions) -> Callable[[CurvePoint], float]:
    def det(point: CurvePoint) -> float:
        _, jac = family_jacobian(sys, point.z, shooting)
        return float(np.linalg.det(jac[:, :-1]))

    return det


def _refined_event(
    sys: SystemDescriptor,
    kind: EventKind,
    i: int,
    refined: Optional[Tuple[CurvePoint, float]],
    atlas: FamilyAtlas,
    opts: ContinuationOptions,
    shooting: ShootingOptions,
) -> FamilyEvent:
    rows = [i, i + 1]
    if refined is None:
        left, right = atlas.rows[i], atlas.rows[i + 1]
        return FamilyEvent(
            kind=kind,
            mu_estimate=0.5 * (left.mu + right.mu),
            rows=rows,
            sigma_min_at_event=min(left.sigma_min, right.sigma_min),
            detail="unrefined",
        )
    point, arclength = refined
    n = sys.n
    chord = build_chord(sys, float(point.z[-1]), point.z[:n], float(point.z[n]), shooting)
    report = nondegeneracy(sys, chord, opts.degeneracy_threshold, shooting)
    return FamilyEvent(
        kind=kind,
        mu_estimate=float(point.z[-1]),
        rows=rows,
        arclength_estimate=arclength,
        sigma_min_at_event=report.sigma_min,
        refined_u=[float(v) for v in point.z[:n]],
        refined_tau=float(point.z[n]),
    )


def _mark_coincidences(events: Sequence[FamilyEvent]) -> None:
    folds = [e for e in events if e.kind == EventKind.FOLD]
    for event in events:
        if event.kind != EventKind.DEGENERACY:
            continue
        for fold in folds:
            same_bracket = event.rows == fold.rows
            close = (
                event.arclength_estimate is not None
                and fold.arclength_estimate is not None
                and abs(event.arclength_estimate - fold.arclength_estimate) <= COINCIDENCE_ARCLENGTH
            )
            if same_bracket or close:
                event.coincides_with_fold = True
                fold.coincides_with_fold = True


def detect_events(
    sys: SystemDescriptor,
    atlas: FamilyAtlas,
    opts: Optional[ContinuationOptions] = None,
    shooting: Optional[ShootingOptions] = None,
    emitter: Optional[EventEmitter] = None,
) -> FamilyAtlas:
    """Locate folds and degeneracies between consecutive rows.

    Existing fold and degeneracy events are replaced; stop events recorded
    by continue_family are kept. Returns the same atlas.
    """
    opts = opts or ContinuationOptions()
    shooting = shooting or ShootingOptions()
    emitter = emitter or create_event_emitter([EventSinkType.LOGGING, EventSinkType.METRICS])
    rows = atlas.rows
    found: List[FamilyEvent] = []
    det = _jacobian_det(sys, shooting)

    for i in range(len(rows) - 1):
        left, right = rows[i], rows[i + 1]
        if _sign(left.dmu_ds) * _sign(right.dmu_ds) < 0:
            refined = _bisect(
                sys, atlas, i, lambda p: float(p.tangent[-1]), _sign(left.dmu_ds), opts, shooting
            )
            found.append(_refined_event(sys, EventKind.FOLD, i, refined, atlas, opts, shooting))
        if _sign(left.shooting_jac_det) * _sign(right.shooting_jac_det) < 0:
            refined = _bisect(sys, atlas, i, det, _sign(left.shooting_jac_det), opts, shooting)
            found.append(_refined_event(sys, EventKind.DEGENERACY, i, refined, atlas, opts, shooting))

    # sigma_min dips without a determinant sign change
    bracketed = {r for e in found if e.kind == EventKind.DEGENERACY for r in e.rows}
    run: List[int] = []
    for i, row in enumerate(rows + [None]):
        if row is not None and row.sigma_min < opts.degeneracy_threshold:
            run.append(i)
            continue
        if run and not bracketed.intersection(run):
            best = min(run, key=lambda k: rows[k].sigma_min)
            found.append(
                FamilyEvent(
                    kind=EventKind.DEGENERACY,
                    mu_estimate=rows[best].mu,
                    rows=[best],
                    arclength_estimate=rows[best].arclength,
                    sigma_min_at_event=rows[best].sigma_min,
                    refined_u=list(rows[best].u),
                    refined_tau=rows[best].tau,
                )
            )
        run = []

    _mark_coincidences(found)
    for event in found:
        emitter.emit(
            RunEvent(
                event_type=EventType.FAMILY_EVENT,
                system_id=atlas.system_id,
                details={
                    "kind": event.kind.value,
                    "mu_estimate": event.mu_estimate,
                    "sigma_min": event.sigma_min_at_event,
                    "coincides_with_fold": event.coincides_with_fold,
                },
            )
        )

    kept = [e for e in atlas.events if e.kind not in (EventKind.FOLD, EventKind.DEGENERACY)]
    atlas.events = sorted(kept + found, key=lambda e: (e.rows[0] if e.rows else 0, e.kind.value))
    logger.info(
        "Family events located",
        extra={
            "system_id": atlas.system_id,
            "folds": sum(e.kind == EventKind.FOLD for e in found),
            "degeneracies": sum(e.kind == EventKind.DEGENERACY for e in found),
        },
    )
    return atlas


def contact_events(atlas: FamilyAtlas, reports: Sequence[ContactReport]) -> FamilyAtlas:
    """Record a contact_violation event for every failed report.

    The event is attached to the row nearest in mu.
    """
    for report in reports:
        if report.passed or not atlas.rows:
            continue
        nearest = min(atlas.rows, key=lambda r: abs(r.mu - report.mu))
        atlas.events.append(
            FamilyEvent(
                kind=EventKind.CONTACT_VIOLATION,
                mu_estimate=report.mu,
                rows=[nearest.index],
                detail=f"{report.violation_count} violations in {report.sample_count} samples",
            )
        )
    atlas.events.sort(key=lambda e: (e.rows[0] if e.rows else 0, e.kind.value))
    return atlas
