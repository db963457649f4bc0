"""beta_R stretching runs.

Each R seeds the flow at the mu0 chord and runs A_{beta_R, mu0, mu1}. For
large R the schedule holds mu = mu1 on [-R, R]; the run records where the
flow parks there. The outcome is

- escaped: the flow left the rho-ball around the seed,
- converged: the gradient norm dropped below plateau_tol while beta was 1,
- parked: neither.
"""

import logging
from typing import List, Optional, Sequence

from src.chordatlas.chords.models import Chord
from src.chordatlas.gradient.descent import flow, path_distance, path_from_chord, relax
from src.chordatlas.gradient.models import (
    CutoffProfile,
    FlowError,
    FlowOptions,
    FlowPath,
    Schedule,
    StretchReport,
)
from src.chordatlas.parallel import fan_out
from src.chordatlas.phase.models import SystemDescriptor

logger = logging.getLogger(__name__)


def _plateau(snapshots: Sequence[FlowPath], profile: CutoffProfile) -> List[FlowPath]:
    peak = profile.peak
    return [y for y in snapshots if peak > 0 and profile(y.s) >= peak]


def stretch_once(
    sys: SystemDescriptor,
    y0: FlowPath,
    mu0: float,
    mu1: float,
    R: float,
    opts: FlowOptions,
    plateau_tol: float = 1e-6,
    target: Optional[FlowPath] = None,
) -> StretchReport:
    """One beta_R flow from y0 with its plateau summary."""
    profile = CutoffProfile.stretch(R)
    traj = flow(sys, y0, Schedule(mu0=mu0, mu1=mu1, profile=profile), opts)
    plateau = _plateau(traj.snapshots, profile)
    best = min(plateau, key=lambda y: y.gradient_norm) if plateau else None
    min_gradient = best.gradient_norm if best is not None else float("inf")

    if traj.stop_reason == "escaped":
        outcome = "escaped"
    elif best is not None and profile.peak >= 1.0 and min_gradient < plateau_tol:
        outcome = "converged"
    else:
        outcome = "parked"
    distance = path_distance(best, target) if best is not None and target is not None else None
    logger.info(
        "Stretching run finished",
        extra={
            "system_id": sys.system_id,
            "R": R,
            "outcome": outcome,
            "plateau_min_gradient": min_gradient,
            "energy": traj.energy,
        },
    )
    return StretchReport(
        R=R,
        outcome=outcome,
        plateau_min_gradient=min_gradient,
        plateau_state=best,
        energy=traj.energy,
        distance_to_target=distance,
        trajectory=traj,
    )


def stretching_experiment(
    sys: SystemDescriptor,
    seed: Chord,
    mu1: float,
    r_values: Sequence[float],
    nodes: int = 64,
    opts: Optional[FlowOptions] = None,
    plateau_tol: float = 1e-6,
    target: Optional[Chord] = None,
    relax_seed: bool = True,
    max_workers: Optional[int] = None,
) -> List[StretchReport]:
    """Run beta_R flows from the seed chord for every R, concurrently.

    The seed is resampled to nodes intervals and, with relax_seed, first
    flowed to the discrete critical point at mu0 so that beta = 0 leaves it
    at rest. FlowErrors of individual runs are raised after all runs end.
    """
    opts = opts or FlowOptions()
    mu0 = seed.mu
    y0 = path_from_chord(sys, seed, nodes)
    if relax_seed:
        y0 = relax(sys, y0, mu0, opts)
    target_path = path_from_chord(sys, target, nodes) if target is not None else None

    outcomes = fan_out(
        lambda R: stretch_once(sys, y0, mu0, mu1, R, opts, plateau_tol, target_path),
        r_values,
        max_workers,
        expected=(FlowError,),
    )
    for outcome in outcomes:
        if isinstance(outcome, FlowError):
            logger.error(
                "Stretching run failed",
                extra={"system_id": sys.system_id, "error_message": str(outcome)},
            )
        if isinstance(outcome, Exception):
            raise outcome
    return list(outcomes)
