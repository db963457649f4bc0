"""Pseudo-arclength continuation of chord families.

A family is a curve z(s) = (u, tau, mu) in the zero set of the shooting
map F. Each step predicts along the unit null vector t of [D_(u,tau) F | F_mu]
and corrects with Newton on

    [ F(z) ; t . (z - z_prev) - ds ] = 0

so the curve passes folds in mu without special treatment. Step control:
ds grows by `grow` after fast correctors, shrinks after slow or failed
ones, and a step that would fall below ds_min ends the run with a stall
event.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.chordatlas.chords.models import (
    Chord,
    NoConvergenceError,
    ShootingError,
    ShootingOptions,
)
from src.chordatlas.chords.nondegeneracy import nondegeneracy
from src.chordatlas.chords.shooting import build_chord, evaluate_shooting, newton_solve
from src.chordatlas.continuation.models import (
    AtlasRow,
    ContinuationOptions,
    EventKind,
    FamilyAtlas,
    FamilyEvent,
    SeedDegenerateError,
)
from src.chordatlas.events.emitter import EventEmitter, EventSinkType, create_event_emitter
from src.chordatlas.events.metrics import get_metrics
from src.chordatlas.events.models import EventType, RunEvent
from src.chordatlas.flow.models import CollisionFloorError, IntegrationError
from src.chordatlas.phase.models import ParameterRangeError, SystemDescriptor
from src.chordatlas.rabinowitz.functional import action

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CurvePoint:
    """A corrected point of the family curve with its oriented tangent."""

    z: np.ndarray
    tangent: np.ndarray
    residual_norm: float
    iterations: int


def family_jacobian(
    sys: SystemDescriptor, z: np.ndarray, opts: ShootingOptions
) -> Tuple[np.ndarray, np.ndarray]:
    """Residual F and the (n+1) x (n+2) Jacobian [D_(u,tau) F | F_mu] at z."""
    n = sys.n
    ev = evaluate_shooting(sys, float(z[-1]), z[:n], float(z[n]), opts, parameter_sensitivity=True)
    return ev.residual, np.hstack([ev.jacobian, ev.jacobian_mu[:, None]])


def unit_tangent(
    jacobian: np.ndarray, reference: Optional[np.ndarray] = None, direction: int = 1
) -> np.ndarray:
    """Unit null vector of the family Jacobian.

    Oriented along reference when given, otherwise so that its mu component
    has the sign of direction.
    """
    _, _, vt = np.linalg.svd(jacobian)
    t = vt[-1]
    if reference is not None:
        if float(t @ reference) < 0:
            t = -t
    elif t[-1] * direction < 0:
        t = -t
    return t / np.linalg.norm(t)


def correct(
    sys: SystemDescriptor,
    z_prev: np.ndarray,
    tangent: np.ndarray,
    ds: float,
    opts: ContinuationOptions,
    shooting: ShootingOptions,
    polish_steps: int = 0,
) -> CurvePoint:
    """Predict z_prev + ds t and correct onto the curve.

    polish_steps extra corrector steps are kept while the residual stays
    inside the converged bound. At a fold the mu row of F is scaled by
    dH/dmu, so mu is only as accurate as |F| / |dH/dmu| without them.

    Raises:
        NoConvergenceError: The corrector did not converge within max_corrector_iter.
        IntegrationError: The flow failed.
        ParameterRangeError: An iterate left mu_range.
    """
    z = z_prev + ds * tangent
    iterations = 0
    stalled = False
    while True:
        residual, jac = family_jacobian(sys, z, shooting)
        arc = float(tangent @ (z - z_prev)) - ds
        norm = float(np.max(np.abs(residual)))
        if norm < shooting.newton_tol and abs(arc) < shooting.newton_tol:
            break
        if stalled and norm < shooting.noise_factor * shooting.newton_tol:
            break
        if iterations >= opts.max_corrector_iter:
            raise NoConvergenceError(iterations, norm, "pseudo-arclength corrector")
        augmented = np.vstack([jac, tangent[None, :]])
        try:
            delta = np.linalg.solve(augmented, -np.concatenate([residual, [arc]]))
        except np.linalg.LinAlgError:
            raise NoConvergenceError(iterations, norm, "singular augmented Jacobian")
        z = z + delta
        iterations += 1
        if not np.all(np.isfinite(z)):
            raise NoConvergenceError(iterations, norm, "non-finite corrector iterate")
        if z[sys.n] <= shooting.tau_floor:
            raise NoConvergenceError(iterations, norm, "period collapsed in corrector")
        stalled = float(np.linalg.norm(delta)) <= shooting.stagnation_step * (1.0 + float(np.linalg.norm(z)))

    bound = max(shooting.newton_tol, norm)
    for _ in range(polish_steps):
        try:
            augmented = np.vstack([jac, tangent[None, :]])
            candidate = z + np.linalg.solve(augmented, -np.concatenate([residual, [arc]]))
            if not np.all(np.isfinite(candidate)) or candidate[sys.n] <= shooting.tau_floor:
                break
            candidate_residual, candidate_jac = family_jacobian(sys, candidate, shooting)
        except (np.linalg.LinAlgError, IntegrationError, ValueError):
            break
        candidate_norm = float(np.max(np.abs(candidate_residual)))
        if candidate_norm >= bound:
            break
        iterations += 1
        z, residual, jac, norm = candidate, candidate_residual, candidate_jac, candidate_norm
        arc = float(tangent @ (z - z_prev)) - ds

    get_metrics().newton_iterations_total.labels(operation="continuation").inc(iterations)
    return CurvePoint(
        z=z,
        tangent=unit_tangent(jac, reference=tangent),
        residual_norm=norm,
        iterations=iterations,
    )


def make_row(
    sys: SystemDescriptor,
    index: int,
    arclength: float,
    z: np.ndarray,
    tangent: np.ndarray,
    shooting: ShootingOptions,
    threshold: float,
    iterations: int = 0,
) -> Tuple[AtlasRow, Chord]:
    """Sample the chord at z and evaluate its action and nondegeneracy."""
    n = sys.n
    chord = build_chord(sys, float(z[-1]), z[:n], float(z[n]), shooting, newton_iterations=iterations)
    report = nondegeneracy(sys, chord, threshold, shooting)
    flags = ["degenerate"] if report.degenerate else []
    row = AtlasRow(
        index=index,
        arclength=arclength,
        mu=chord.mu,
        u=[float(v) for v in chord.u],
        tau=chord.tau,
        action=action(sys, chord),
        sigma_min=report.sigma_min,
        shooting_sigma_min=report.shooting_sigma_min,
        shooting_jac_det=report.shooting_jac_det,
        dmu_ds=float(tangent[-1]),
        residual_norm=chord.residual_norm,
        tangent=[float(v) for v in tangent],
        flags=flags,
    )
    return row, chord


def row_point(row: AtlasRow) -> np.ndarray:
    """The curve coordinates (u, tau, mu) of a row."""
    return np.array([*row.u, row.tau, row.mu], dtype=float)


def _window(sys: SystemDescriptor, opts: ContinuationOptions) -> Tuple[float, float]:
    lo, hi = sys.mu_range
    if opts.mu_window is not None:
        lo, hi = max(lo, opts.mu_window[0]), min(hi, opts.mu_window[1])
    return lo, hi


def _land(
    sys: SystemDescriptor,
    z_in: np.ndarray,
    z_out: np.ndarray,
    bound: float,
    shooting: ShootingOptions,
) -> np.ndarray:
    """Solve at mu = bound from the interpolant of z_in and z_out."""
    n = sys.n
    weight = (bound - z_in[-1]) / (z_out[-1] - z_in[-1])
    guess = z_in + weight * (z_out - z_in)
    u, tau, _, _ = newton_solve(sys, bound, guess[:n], float(guess[n]), shooting)
    return np.array([*u, tau, bound], dtype=float)


def continue_family(
    sys: SystemDescriptor,
    seed: Chord,
    direction: int = 1,
    opts: Optional[ContinuationOptions] = None,
    shooting: Optional[ShootingOptions] = None,
    emitter: Optional[EventEmitter] = None,
) -> FamilyAtlas:
    """Continue the family through a nondegenerate seed chord.

    direction = +1 starts towards increasing mu. The run ends at the
    mu window (range_end), on a collision (collision_stop), at ds_min
    (stall) or after max_steps accepted steps. Folds and degeneracies are
    located afterwards by detect_events.

    Raises:
        SeedDegenerateError: The seed is degenerate.
        ParameterRangeError: The seed lies outside mu_range.
    """
    opts = opts or ContinuationOptions()
    shooting = shooting or ShootingOptions(samples=seed.nodes)
    emitter = emitter or create_event_emitter([EventSinkType.LOGGING, EventSinkType.METRICS])
    sys.check_mu(seed.mu)
    if direction not in (-1, 1):
        raise ValueError("direction must be +1 or -1")

    seed_report = nondegeneracy(sys, seed, opts.degeneracy_threshold, shooting)
    if seed_report.degenerate:
        raise SeedDegenerateError(seed.mu, seed_report.sigma_min, opts.degeneracy_threshold)

    lo, hi = _window(sys, opts)
    z = np.array([*seed.u, seed.tau, seed.mu], dtype=float)
    _, jac = family_jacobian(sys, z, shooting)
    tangent = unit_tangent(jac, direction=direction)

    atlas = FamilyAtlas(system_id=sys.system_id, direction=direction)
    row, _ = make_row(sys, 0, 0.0, z, tangent, shooting, opts.degeneracy_threshold, seed.newton_iterations)
    row.flags.append("seed")
    atlas.rows.append(row)

    def stop(kind: EventKind, mu: float, detail: Optional[str] = None) -> None:
        last = atlas.rows[-1]
        event = FamilyEvent(
            kind=kind,
            mu_estimate=mu,
            rows=[last.index],
            arclength_estimate=last.arclength,
            sigma_min_at_event=last.sigma_min,
            refined_u=list(last.u),
            refined_tau=last.tau,
            detail=detail,
        )
        atlas.events.append(event)
        emitter.emit(
            RunEvent(
                event_type=EventType.FAMILY_EVENT,
                system_id=sys.system_id,
                details={"kind": kind.value, "mu_estimate": mu, "detail": detail},
            )
        )

    def step_event(result: str, mu: float, ds_used: float) -> None:
        emitter.emit(
            RunEvent(
                event_type=EventType.CONTINUATION_STEP,
                system_id=sys.system_id,
                details={"result": result, "mu": mu, "ds": ds_used},
            )
        )

    ds = opts.ds
    arclength = 0.0
    for _ in range(opts.max_steps):
        predicted = z + ds * tangent
        try:
            if not lo <= predicted[-1] <= hi:
                point = None
            else:
                point = correct(sys, z, tangent, ds, opts, shooting)
        except CollisionFloorError as e:
            step_event("rejected", float(z[-1]), ds)
            stop(EventKind.COLLISION_STOP, float(z[-1]), str(e))
            break
        except (ShootingError, IntegrationError, ParameterRangeError) as e:
            step_event("rejected", float(z[-1]), ds)
            logger.debug(
                "Continuation step rejected",
                extra={"system_id": sys.system_id, "mu": float(z[-1]), "ds": ds, "error_message": str(e)},
            )
            if ds * opts.shrink < opts.ds_min:
                stop(EventKind.STALL, float(z[-1]), str(e))
                break
            ds *= opts.shrink
            continue

        outside = predicted if point is None else point.z
        if not lo <= outside[-1] <= hi:
            bound = hi if outside[-1] > hi else lo
            try:
                landed = _land(sys, z, outside, bound, shooting)
            except (ShootingError, IntegrationError) as e:
                if ds * opts.shrink >= opts.ds_min:
                    ds *= opts.shrink
                    continue
                stop(EventKind.STALL, float(z[-1]), str(e))
                break
            _, jac = family_jacobian(sys, landed, shooting)
            land_tangent = unit_tangent(jac, reference=tangent)
            arclength += float(np.linalg.norm(landed - z))
            row, _ = make_row(
                sys, len(atlas.rows), arclength, landed, land_tangent, shooting, opts.degeneracy_threshold
            )
            row.flags.append("range_end")
            atlas.rows.append(row)
            step_event("accepted", bound, ds)
            stop(EventKind.RANGE_END, bound)
            break

        arclength += ds
        row, _ = make_row(
            sys,
            len(atlas.rows),
            arclength,
            point.z,
            point.tangent,
            shooting,
            opts.degeneracy_threshold,
            point.iterations,
        )
        atlas.rows.append(row)
        step_event("accepted", row.mu, ds)
        logger.debug(
            "Continuation step accepted",
            extra={
                "system_id": sys.system_id,
                "mu": row.mu,
                "ds": ds,
                "iteration": point.iterations,
                "sigma_min": row.sigma_min,
            },
        )
        z, tangent = point.z, point.tangent
        if point.iterations <= opts.fast_iterations:
            ds = min(ds * opts.grow, opts.ds_max)
        elif point.iterations >= opts.slow_iterations:
            ds = max(ds * opts.shrink, opts.ds_min)

    logger.info(
        "Continuation finished",
        extra={
            "system_id": sys.system_id,
            "rows": len(atlas.rows),
            "mu_first": atlas.rows[0].mu,
            "mu_last": atlas.rows[-1].mu,
            "stops": [e.kind.value for e in atlas.events],
        },
    )
    return atlas
