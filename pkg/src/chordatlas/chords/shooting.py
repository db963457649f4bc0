"""Newton shooting for chords from L_0 to L_1.

Unknowns are z = (u, tau): Lagrangian coordinates of the start point
x(u) = base_0 + B_0 u and the period. The n+1 equations are

    F(u, tau) = ( N_1^T (phi^tau(x(u)) - base_1),  H_mu(x(u)) )

where N_1 is the orthonormal normal frame of L_1. The Jacobian is

    [[ N_1^T M B_0,        N_1^T X_H(phi^tau(x)) ],
     [ grad H(x)^T B_0,    0                     ]]

with M = D(phi^tau) from the variational equations.

Requirements:
- Converged when max |F| < newton_tol; at most max_iter iterations.
- A step below stagnation_step (relative) with |F| < noise_factor * tol is
  accepted as converged at the integrator noise floor.
- tau <= tau_floor raises TauCollapsedError.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.chordatlas.chords.models import (
    Chord,
    NoConvergenceError,
    ShootingError,
    ShootingGuess,
    ShootingOptions,
    TauCollapsedError,
)
from src.chordatlas.events.metrics import get_metrics
from src.chordatlas.flow import FlowResult, IntegrationError, integrate, integrate_with_variational
from src.chordatlas.parallel import fan_out
from src.chordatlas.phase.geometry import symplectic_j
from src.chordatlas.phase.models import SystemDescriptor

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ShootingEvaluation:
    """Residual and derivatives of the shooting system at one (u, tau, mu)."""

    residual: np.ndarray
    jacobian: np.ndarray
    jacobian_mu: Optional[np.ndarray]
    flow: FlowResult


def start_point(sys: SystemDescriptor, u: Sequence[float]) -> np.ndarray:
    """Point x(u) of L_0 with Lagrangian coordinates u."""
    return sys.lagrangian(0).point(np.asarray(u, dtype=float))


def evaluate_shooting(
    sys: SystemDescriptor,
    mu: float,
    u: Sequence[float],
    tau: float,
    opts: Optional[ShootingOptions] = None,
    parameter_sensitivity: bool = False,
    sample_times: Optional[Sequence[float]] = None,
) -> ShootingEvaluation:
    """Evaluate F and its Jacobian (and d/dmu when requested) at (u, tau, mu)."""
    opts = opts or ShootingOptions()
    l0, l1 = sys.lagrangians
    x0 = start_point(sys, u)
    flow = integrate_with_variational(
        sys,
        x0,
        mu,
        tau,
        opts.integrator,
        sample_times=sample_times,
        parameter_sensitivity=parameter_sensitivity,
    )
    get_metrics().integrations_total.labels(kind="variational").inc()
    x1 = flow.final_state
    n = sys.n

    residual = np.concatenate([l1.signed_distances(x1), [sys.h(x0, mu)]])
    grad0 = sys.grad_h(x0, mu)
    xh1 = symplectic_j(n) @ sys.grad_h(x1, mu)

    jac = np.zeros((n + 1, n + 1))
    jac[:n, :n] = l1.normal_frame.T @ flow.monodromy @ l0.tangent_basis
    jac[:n, n] = l1.normal_frame.T @ xh1
    jac[n, :n] = grad0 @ l0.tangent_basis

    jac_mu = None
    if parameter_sensitivity:
        jac_mu = np.concatenate([l1.normal_frame.T @ flow.sensitivity, [sys.dh_dmu(x0, mu)]])
    return ShootingEvaluation(residual=residual, jacobian=jac, jacobian_mu=jac_mu, flow=flow)


def shooting_residual(
    sys: SystemDescriptor,
    mu: float,
    u: Sequence[float],
    tau: float,
    opts: Optional[ShootingOptions] = None,
) -> np.ndarray:
    """F(u, tau) without variational equations."""
    opts = opts or ShootingOptions()
    x0 = start_point(sys, u)
    flow = integrate(sys, x0, mu, tau, opts.integrator)
    get_metrics().integrations_total.labels(kind="flow").inc()
    return np.concatenate([sys.lagrangian(1).signed_distances(flow.final_state), [sys.h(x0, mu)]])


def shooting_jacobian(
    sys: SystemDescriptor,
    mu: float,
    u: Sequence[float],
    tau: float,
    opts: Optional[ShootingOptions] = None,
) -> np.ndarray:
    """Jacobian of F with respect to (u, tau)."""
    return evaluate_shooting(sys, mu, u, tau, opts).jacobian


def level_start(
    sys: SystemDescriptor, mu: float, u: Sequence[float], max_iter: int = 30, tol: float = 1e-13
) -> Optional[np.ndarray]:
    """Move u within L_0 onto {H_mu = 0} by minimum-norm Newton steps."""
    plane = sys.lagrangian(0)
    u = np.asarray(u, dtype=float).copy()
    for _ in range(max_iter):
        x = plane.point(u)
        with np.errstate(all="ignore"):
            value = sys.h(x, mu)
            g = plane.tangent_basis.T @ sys.grad_h(x, mu)
        if not np.isfinite(value) or not np.all(np.isfinite(g)):
            return None
        if abs(value) < tol:
            return u
        norm2 = float(g @ g)
        if norm2 < 1e-24:
            return None
        u = u - (value / norm2) * g
    return None


def build_chord(
    sys: SystemDescriptor,
    mu: float,
    u: Sequence[float],
    tau: float,
    opts: Optional[ShootingOptions] = None,
    newton_iterations: int = 0,
) -> Chord:
    """Sample the trajectory from x(u) at t = tau k/N and package it as a Chord."""
    opts = opts or ShootingOptions()
    u = np.asarray(u, dtype=float)
    grid = tau * np.arange(opts.samples + 1) / opts.samples
    ev = evaluate_shooting(sys, mu, u, tau, opts, sample_times=grid)
    samples = ev.flow.states
    gap = max(sys.lagrangian(0).distance(samples[0]), sys.lagrangian(1).distance(samples[-1]))
    return Chord(
        system_id=sys.system_id,
        mu=float(mu),
        tau=float(tau),
        u=u.copy(),
        samples=samples,
        residual_norm=float(np.max(np.abs(ev.residual))),
        boundary_gap=float(gap),
        newton_iterations=newton_iterations,
        monodromy=ev.flow.monodromy,
    )


def newton_solve(
    sys: SystemDescriptor,
    mu: float,
    u: Sequence[float],
    tau: float,
    opts: ShootingOptions,
    polish_steps: int = 0,
) -> tuple[np.ndarray, float, int, float]:
    """Run the shooting Newton iteration; returns (u, tau, iterations, |F|).

    polish_steps extra Newton steps follow convergence. A step is kept while
    its residual stays inside the converged bound; near a fold |F| is small
    long before u is accurate.
    """
    n = sys.n
    z = np.concatenate([np.asarray(u, dtype=float), [float(tau)]])
    if z.size != n + 1:
        raise ValueError(f"guess must have {n} start coordinates, got {z.size - 1}")
    if z[n] <= opts.tau_floor:
        raise TauCollapsedError(float(z[n]), opts.tau_floor)

    iterations = 0
    stalled = False
    while True:
        ev = evaluate_shooting(sys, mu, z[:n], z[n], opts)
        norm = float(np.max(np.abs(ev.residual)))
        logger.debug(
            "Newton iterate",
            extra={"system_id": sys.system_id, "mu": mu, "iteration": iterations, "residual": norm},
        )
        if norm < opts.newton_tol:
            break
        if stalled and norm < opts.noise_factor * opts.newton_tol:
            logger.debug(
                "Newton stalled at the integrator noise floor",
                extra={"system_id": sys.system_id, "mu": mu, "residual": norm},
            )
            break
        if iterations >= opts.max_iter:
            raise NoConvergenceError(iterations, norm)
        try:
            delta = np.linalg.solve(ev.jacobian, -ev.residual)
        except np.linalg.LinAlgError:
            raise NoConvergenceError(iterations, norm, "singular shooting Jacobian")
        z = z + delta
        iterations += 1
        if not np.all(np.isfinite(z)):
            raise NoConvergenceError(iterations, norm, "non-finite Newton iterate")
        if z[n] <= opts.tau_floor:
            raise TauCollapsedError(float(z[n]), opts.tau_floor)
        stalled = float(np.linalg.norm(delta)) <= opts.stagnation_step * (1.0 + float(np.linalg.norm(z)))

    bound = max(opts.newton_tol, norm)
    for _ in range(polish_steps):
        try:
            candidate = z + np.linalg.solve(ev.jacobian, -ev.residual)
            if not np.all(np.isfinite(candidate)) or candidate[n] <= opts.tau_floor:
                break
            candidate_ev = evaluate_shooting(sys, mu, candidate[:n], candidate[n], opts)
        except (np.linalg.LinAlgError, IntegrationError):
            break
        candidate_norm = float(np.max(np.abs(candidate_ev.residual)))
        if candidate_norm >= bound:
            break
        iterations += 1
        z, ev, norm = candidate, candidate_ev, candidate_norm

    get_metrics().newton_iterations_total.labels(operation="shoot").inc(iterations)
    return z[:n], float(z[n]), iterations, norm


def shoot(
    sys: SystemDescriptor,
    mu: float,
    guess: ShootingGuess,
    opts: Optional[ShootingOptions] = None,
) -> Chord:
    """Find the chord near a guess by Newton shooting.

    Raises:
        ParameterRangeError: mu outside mu_range.
        NoConvergenceError: Newton failed within max_iter.
        TauCollapsedError: The period fell to tau_floor.
        IntegrationError: Collision floor or non-finite flow.
    """
    opts = opts or ShootingOptions()
    mu = sys.check_mu(mu)
    metrics = get_metrics()
    try:
        u, tau, iterations, _ = newton_solve(sys, mu, guess.u, guess.tau, opts)
    except (ShootingError, IntegrationError):
        metrics.shooting_total.labels(result="failed").inc()
        raise
    chord = build_chord(sys, mu, u, tau, opts, newton_iterations=iterations)
    metrics.shooting_total.labels(result="converged").inc()
    logger.info(
        "Chord converged",
        extra={
            "system_id": sys.system_id,
            "mu": mu,
            "tau": chord.tau,
            "residual": chord.residual_norm,
            "iteration": iterations,
        },
    )
    return chord


# =============================================================================
# Multi-start and scanning
# =============================================================================


def chord_distance(a: Chord, b: Chord) -> float:
    """Surrogate C^0 distance: max grid state distance plus |tau_a - tau_b|."""
    if a.samples.shape != b.samples.shape:
        raise ValueError("chords must share the sample grid to be compared")
    return float(np.max(np.linalg.norm(a.samples - b.samples, axis=1)) + abs(a.tau - b.tau))


def distinct_chords(chords: Sequence[Chord], cutoff: float = 1e-6) -> List[Chord]:
    """Keep chords pairwise farther apart than cutoff, best residual first."""
    kept: List[Chord] = []
    for chord in sorted(chords, key=lambda c: c.residual_norm):
        if all(chord_distance(chord, other) > cutoff for other in kept):
            kept.append(chord)
    return kept


def multi_start_shoot(
    sys: SystemDescriptor,
    mu: float,
    guesses: Sequence[ShootingGuess],
    opts: Optional[ShootingOptions] = None,
    max_workers: Optional[int] = None,
    distinct_cutoff: float = 1e-6,
) -> List[Chord]:
    """Shoot from every guess concurrently and return distinct converged chords."""
    opts = opts or ShootingOptions()
    outcomes = fan_out(
        lambda g: shoot(sys, mu, g, opts), guesses, max_workers, expected=(ShootingError, IntegrationError)
    )
    converged = [c for c in outcomes if isinstance(c, Chord)]
    failures = len(outcomes) - len(converged)
    chords = distinct_chords(converged, distinct_cutoff)
    logger.info(
        "Multi-start shooting finished",
        extra={
            "system_id": sys.system_id,
            "mu": mu,
            "starts": len(guesses),
            "failed": failures,
            "distinct": len(chords),
        },
    )
    return chords


def scan_guesses(
    sys: SystemDescriptor,
    mu: float,
    u_grid: Sequence[Sequence[float]],
    tau_grid: Sequence[float],
    opts: Optional[ShootingOptions] = None,
    max_guesses: int = 10,
) -> List[ShootingGuess]:
    """Coarse scan of |F| over start coordinates x periods.

    Every u is first moved onto Sigma_mu within L_0; one integration per u
    is then sampled on tau_grid. Local minima of max |F| over the
    (u index, tau index) grid are returned as guesses, best first.
    """
    opts = opts or ShootingOptions()
    mu = sys.check_mu(mu)
    taus = np.asarray(tau_grid, dtype=float)
    if taus.size < 2 or np.any(np.diff(taus) <= 0) or taus[0] <= 0:
        raise ValueError("tau_grid must be positive and strictly increasing")
    l1 = sys.lagrangian(1)

    def row(u: Sequence[float]) -> Optional[tuple[np.ndarray, np.ndarray]]:
        start = level_start(sys, mu, u)
        if start is None:
            return None
        flow = integrate(
            sys, start_point(sys, start), mu, float(taus[-1]), opts.integrator, sample_times=taus
        )
        # The first sample is t = 0, which is prepended when taus[0] > 0.
        states = flow.states[-taus.size :]
        return start, np.array([np.max(np.abs(l1.signed_distances(x))) for x in states])

    outcomes = fan_out(row, u_grid, expected=(ShootingError, IntegrationError))
    starts: List[Optional[np.ndarray]] = []
    table = np.full((len(outcomes), taus.size), np.inf)
    for i, outcome in enumerate(outcomes):
        if isinstance(outcome, tuple):
            starts.append(outcome[0])
            table[i] = outcome[1]
        else:
            starts.append(None)

    minima = []
    rows, cols = table.shape
    for i in range(rows):
        for j in range(cols):
            value = table[i, j]
            if not np.isfinite(value):
                continue
            neighbours = [
                table[a, b]
                for a, b in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1))
                if 0 <= a < rows and 0 <= b < cols
            ]
            if all(value <= other for other in neighbours):
                minima.append((value, i, j))
    minima.sort()
    guesses = [ShootingGuess(u=starts[i], tau=float(taus[j])) for _, i, j in minima[:max_guesses]]
    logger.debug(
        "Scan finished",
        extra={"system_id": sys.system_id, "mu": mu, "candidates": len(guesses)},
    )
    return guesses
