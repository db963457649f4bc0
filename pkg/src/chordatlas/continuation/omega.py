"""Limit diagnostics of chord families.

- omega_probe: Re-shoot along mu_nu = mu_inf + side delta ratio^-nu and
  extrapolate the limit chord
- limit_census: Count distinct chords near the limit just below and
  just above mu_inf
- verify_rows: Re-shoot every atlas row from its stored (u, tau)

The limit chord is extrapolated componentwise with Aitken's delta-squared
process, which is exact for geometric sequences of any rate. Near a
quadratic fold the chords approach their limit like sqrt(mu_inf - mu), so
each level contracts distances by sqrt(ratio).
"""

import itertools
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.chordatlas.chords.models import (
    Chord,
    ShootingError,
    ShootingGuess,
    ShootingOptions,
)
from src.chordatlas.chords.nondegeneracy import nondegeneracy
from src.chordatlas.chords.shooting import build_chord, chord_distance, multi_start_shoot, newton_solve
from src.chordatlas.continuation.models import (
    AtlasRow,
    CensusResult,
    EventKind,
    FamilyAtlas,
    FamilyEvent,
    OmegaProbe,
)
from src.chordatlas.flow.models import IntegrationError
from src.chordatlas.parallel import fan_out
from src.chordatlas.phase.models import SystemDescriptor
from src.chordatlas.rabinowitz.functional import action

logger = logging.getLogger(__name__)

# Extra Newton steps per probe level; near a fold |F| < tol leaves u inaccurate
PROBE_POLISH_STEPS = 3


def aitken_limit(sequence: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise Aitken extrapolation from the last three terms.

    Components whose second difference vanishes keep their last value.
    """
    if len(sequence) < 3:
        return np.asarray(sequence[-1], dtype=float).copy()
    x0, x1, x2 = (np.asarray(x, dtype=float) for x in sequence[-3:])
    d1, d2 = x1 - x0, x2 - x1
    denom = d2 - d1
    limit = x2.copy()
    ok = np.abs(denom) > 1e-14 * (1.0 + np.abs(x2))
    limit[ok] = x2[ok] - d2[ok] ** 2 / denom[ok]
    return limit


def _branch_row(atlas: FamilyAtlas, event: FamilyEvent, mu_inf: float) -> AtlasRow:
    """Row on the probed branch: the first bracketing row not sitting at mu_inf."""
    if not event.rows:
        raise ValueError("event has no bracketing rows")
    for index in range(event.rows[0], -1, -1):
        row = atlas.rows[index]
        if row.mu != mu_inf:
            return row
    raise ValueError("no atlas row on either side of the event")


def omega_probe(
    sys: SystemDescriptor,
    atlas: FamilyAtlas,
    event: FamilyEvent,
    refinement_depth: int = 8,
    delta: float = 1e-3,
    ratio: float = 2.0,
    shooting: Optional[ShootingOptions] = None,
    threshold: float = 1e-6,
) -> OmegaProbe:
    """Approach the event along its branch and extrapolate the limit chord.

    Levels are shot in order, each from the previous solution. A failing
    level stops the refinement; the probe then reports the deepest level
    reached and a warning.
    """
    if refinement_depth < 0:
        raise ValueError("refinement_depth must be non-negative")
    if delta <= 0 or ratio <= 1:
        raise ValueError("delta must be positive and ratio greater than 1")
    shooting = shooting or ShootingOptions()
    mu_inf = event.mu_estimate
    row = _branch_row(atlas, event, mu_inf)
    side = 1 if row.mu > mu_inf else -1
    n = sys.n

    probe = OmegaProbe(
        event_kind=event.kind,
        mu_infinity_estimate=mu_inf,
        side=side,
        delta=delta,
        ratio=ratio,
    )
    chords: List[Chord] = []
    u, tau = np.asarray(row.u, dtype=float), row.tau
    for level in range(refinement_depth + 1):
        mu = mu_inf + side * delta * ratio ** (-level)
        try:
            sys.check_mu(mu)
            u, tau, iterations, _ = newton_solve(sys, mu, u, tau, shooting, polish_steps=PROBE_POLISH_STEPS)
            chords.append(build_chord(sys, mu, u, tau, shooting, newton_iterations=iterations))
        except (ShootingError, IntegrationError, ValueError) as e:
            probe.warning = f"refinement stopped at level {level}: {e}"
            logger.warning(
                "Omega probe stopped early",
                extra={"system_id": sys.system_id, "mu": mu, "level": level, "error_message": str(e)},
            )
            break
        probe.sample_mus.append(mu)
        probe.deepest_level = level

    if not chords:
        return probe

    probe.action_values = [action(sys, c) for c in chords]
    probe.pairwise_c0_distances = [chord_distance(a, b) for a, b in zip(chords, chords[1:])]
    probe.contractions = [
        a / b for a, b in zip(probe.pairwise_c0_distances, probe.pairwise_c0_distances[1:]) if b > 0
    ]
    if probe.contractions:
        mean = float(np.mean(probe.contractions))
        probe.convergence_order = math.log(mean) / math.log(ratio) if mean > 0 else None

    limit = aitken_limit([np.array([*c.u, c.tau]) for c in chords])
    limit_chord = build_chord(sys, mu_inf, limit[:n], float(limit[n]), shooting)
    report = nondegeneracy(sys, limit_chord, threshold, shooting)
    probe.limit_chord = limit_chord
    probe.limit_u = [float(v) for v in limit[:n]]
    probe.limit_tau = float(limit[n])
    probe.limit_action = action(sys, limit_chord)
    probe.limit_sigma_min = report.sigma_min
    probe.limit_degenerate = report.degenerate
    probe.action_spread = max(abs(a - probe.limit_action) for a in probe.action_values)

    logger.info(
        "Omega probe finished",
        extra={
            "system_id": sys.system_id,
            "mu_infinity": mu_inf,
            "deepest_level": probe.deepest_level,
            "action_spread": probe.action_spread,
            "limit_degenerate": probe.limit_degenerate,
            "convergence_order": probe.convergence_order,
        },
    )
    return probe


def census_guesses(
    center_u: Sequence[float], center_tau: float, radius: float, grid: int
) -> List[ShootingGuess]:
    """Tensor grid of starts in the box of half-width radius around (u, tau).

    An even grid keeps the centre, where the fold Jacobian is singular,
    off the grid.
    """
    if grid < 2 or grid % 2:
        raise ValueError("census grid must be an even count >= 2")
    offsets = radius * np.linspace(-1.0, 1.0, grid)
    axes = [c + offsets for c in center_u] + [center_tau + offsets]
    return [ShootingGuess(u=list(point[:-1]), tau=float(point[-1])) for point in itertools.product(*axes)]


def limit_census(
    sys: SystemDescriptor,
    event: FamilyEvent,
    delta: float = 1e-3,
    neighborhood_radius: float = 1e-2,
    grid: int = 6,
    shooting: Optional[ShootingOptions] = None,
    max_iter: int = 15,
    distinct_cutoff: float = 1e-6,
    limit: Optional[Tuple[Sequence[float], float]] = None,
    max_workers: Optional[int] = None,
) -> CensusResult:
    """Count distinct chords within neighborhood_radius of the limit chord at mu_inf -+ delta.

    The limit chord is (u, tau) from `limit`, or the refined point of the
    event. Below a fold two chords are expected; a single one is reported
    with a warning since the multi-start search may miss a branch.
    """
    if limit is None:
        if event.refined_u is None or event.refined_tau is None:
            raise ValueError("event has no refined chord; pass limit explicitly")
        limit = (event.refined_u, event.refined_tau)
    shooting = shooting or ShootingOptions()
    census_opts = shooting.model_copy(update={"max_iter": max_iter})
    mu_inf = event.mu_estimate
    limit_chord = build_chord(sys, mu_inf, limit[0], float(limit[1]), shooting)
    guesses = census_guesses(limit[0], float(limit[1]), neighborhood_radius, grid)

    def count(mu: float) -> List[Chord]:
        lo, hi = sys.mu_range
        if not lo <= mu <= hi:
            return []
        found = multi_start_shoot(sys, mu, guesses, census_opts, max_workers, distinct_cutoff)
        return [c for c in found if chord_distance(c, limit_chord) <= neighborhood_radius]

    below, above = count(mu_inf - delta), count(mu_inf + delta)
    warning = None
    if event.kind == EventKind.FOLD and len(below) == 1:
        warning = "one chord found below a fold; the search probably missed a branch"
        logger.warning(
            "Census search incomplete",
            extra={"system_id": sys.system_id, "mu_infinity": mu_inf, "count_below": 1},
        )
    result = CensusResult(
        mu_infinity=mu_inf,
        delta=delta,
        radius=neighborhood_radius,
        count_below=len(below),
        count_above=len(above),
        chords_below=[([float(v) for v in c.u], c.tau) for c in below],
        chords_above=[([float(v) for v in c.u], c.tau) for c in above],
        warning=warning,
    )
    logger.info(
        "Census finished",
        extra={
            "system_id": sys.system_id,
            "mu_infinity": mu_inf,
            "count_below": result.count_below,
            "count_above": result.count_above,
        },
    )
    return result


def verify_rows(
    sys: SystemDescriptor,
    atlas: FamilyAtlas,
    shooting: Optional[ShootingOptions] = None,
    max_workers: Optional[int] = None,
) -> List[Optional[int]]:
    """Newton iterations to re-converge every row from its own (u, tau).

    None marks a row that failed to re-converge.
    """
    shooting = shooting or ShootingOptions()

    def reshoot(row: AtlasRow) -> int:
        return newton_solve(sys, row.mu, row.u, row.tau, shooting)[2]

    outcomes = fan_out(reshoot, atlas.rows, max_workers, expected=(ShootingError, IntegrationError))
    return [o if isinstance(o, int) else None for o in outcomes]
