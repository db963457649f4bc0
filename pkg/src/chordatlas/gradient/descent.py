"""Negative gradient flow of the discrete action with a parameter schedule.

The flow works in reduced coordinates z: the tangent coordinates of the
boundary nodes on L_0 and L_1, the full interior nodes and sigma. The
metric is diagonal there (trapezoid weights, 1 on sigma), so with
xi = G^(1/2) z the gradient is the Euclidean one.

Schemes, with step h:
- descent: xi <- xi - h g
- split:   xi <- xi - h U diag(sign(l) / (1 + h |l|)) U^T g, where U, l
  are the eigenpairs of the reduced Hessian. Positive directions take an
  implicit Euler step and negative ones an implicit ascent step, so
  nondegenerate critical points of any index attract.

Where beta is locally constant the descent scheme backtracks on action
increase and the split scheme on gradient-norm increase.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from src.chordatlas.chords.models import Chord
from src.chordatlas.gradient.models import (
    DivergenceError,
    EnergyBoundReport,
    FlowOptions,
    FlowPath,
    FlowTrajectory,
    Schedule,
    SigmaFloorError,
)
from src.chordatlas.phase.models import SystemDescriptor
from src.chordatlas.rabinowitz.functional import (
    discrete_action,
    discrete_hessian,
    euclidean_gradient,
    node_weights,
)

logger = logging.getLogger(__name__)

GROWTH = 1.5


@dataclass(frozen=True, eq=False)
class Reduction:
    """Map T from reduced to full coordinates and the reduced metric diagonal."""

    basis: np.ndarray
    weights: np.ndarray

    @classmethod
    def for_system(cls, sys: SystemDescriptor, nodes: int) -> "Reduction":
        if nodes < 2:
            raise ValueError(f"flow needs at least 2 path intervals, got {nodes}")
        n, dim = sys.n, 2 * sys.n
        l0, l1 = sys.lagrangians
        full = (nodes + 1) * dim + 1
        reduced = (nodes - 1) * dim + 2 * n + 1
        basis = np.zeros((full, reduced))
        basis[:dim, :n] = l0.tangent_basis
        basis[dim : nodes * dim, n : n + (nodes - 1) * dim] = np.eye((nodes - 1) * dim)
        basis[nodes * dim : (nodes + 1) * dim, n + (nodes - 1) * dim : -1] = l1.tangent_basis
        basis[-1, -1] = 1.0
        nw = node_weights(nodes)
        weights = np.concatenate([np.full(n, nw[0]), np.repeat(nw[1:-1], dim), np.full(n, nw[-1]), [1.0]])
        return cls(basis=basis, weights=weights)


def _full_gradient(sys: SystemDescriptor, w: np.ndarray, sigma: float, mu: float) -> np.ndarray:
    g, g_sigma = euclidean_gradient(sys, w, sigma, mu)
    return np.concatenate([g.reshape(-1), [g_sigma]])


def _state(
    sys: SystemDescriptor, w: np.ndarray, sigma: float, s: float, mu: float, red: Reduction
) -> FlowPath:
    g_z = red.basis.T @ _full_gradient(sys, w, sigma, mu)
    return FlowPath(
        w=w,
        sigma=sigma,
        s=s,
        mu=mu,
        action=discrete_action(sys, w, sigma, mu),
        gradient_norm=float(np.sqrt(np.sum(g_z**2 / red.weights))),
    )


def _project(sys: SystemDescriptor, w: np.ndarray) -> np.ndarray:
    l0, l1 = sys.lagrangians
    w = w.copy()
    w[0] = l0.project(w[0])
    w[-1] = l1.project(w[-1])
    return w


def path_from_chord(sys: SystemDescriptor, chord: Chord, nodes: int) -> FlowPath:
    """Resample a chord onto a uniform grid of nodes intervals, sigma = tau."""
    if nodes < 2:
        raise ValueError(f"flow needs at least 2 path intervals, got {nodes}")
    if chord.nodes % nodes == 0:
        w = chord.samples[:: chord.nodes // nodes].copy()
    else:
        t = np.linspace(0.0, 1.0, chord.nodes + 1)
        w = CubicSpline(t, chord.samples, axis=0)(np.linspace(0.0, 1.0, nodes + 1))
    w = _project(sys, w)
    red = Reduction.for_system(sys, nodes)
    return _state(sys, w, chord.tau, 0.0, chord.mu, red)


def path_distance(a: FlowPath, b: FlowPath) -> float:
    """Max node distance plus |sigma_a - sigma_b|."""
    return float(np.max(np.linalg.norm(a.w - b.w, axis=1)) + abs(a.sigma - b.sigma))


def _check(y: FlowPath, opts: FlowOptions) -> None:
    norm = max(float(np.max(np.abs(y.w))), abs(y.sigma))
    if not np.isfinite(norm) or not np.isfinite(y.action) or norm > opts.divergence_norm:
        raise DivergenceError(y.s, norm)
    if y.sigma <= opts.sigma_floor:
        raise SigmaFloorError(y.s, y.sigma, opts.sigma_floor)


def flow(
    sys: SystemDescriptor,
    y0: FlowPath,
    schedule: Schedule,
    opts: Optional[FlowOptions] = None,
) -> FlowTrajectory:
    """Run the gradient flow of A_{beta, mu0, mu1} from y0.

    The flow starts at schedule.s_start and stops when the gradient norm is
    below tol after the schedule has ended, after s_settle more flow time,
    after max_steps, when backtracking falls below min_ds, or when the
    state leaves the rho-ball around y0.

    Raises:
        ParameterRangeError: mu0 or mu1 outside mu_range.
        SigmaFloorError: sigma reached sigma_floor.
        DivergenceError: The state blew up.
    """
    opts = opts or FlowOptions()
    sys.check_mu(schedule.mu0)
    sys.check_mu(schedule.mu1)
    nodes = y0.nodes
    red = Reduction.for_system(sys, nodes)
    inv_sqrt = 1.0 / np.sqrt(red.weights)
    dim = 2 * sys.n
    s = schedule.s_start
    s_stop = schedule.s_end + opts.s_settle

    w = _project(sys, np.asarray(y0.w, dtype=float))
    current = _state(sys, w, float(y0.sigma), s, schedule.mu_at(s), red)
    _check(current, opts)
    start = current
    traj = FlowTrajectory(schedule=schedule, scheme=opts.scheme, snapshots=[current])
    h_max = opts.step
    h = h_max

    def unpack(z_full: np.ndarray) -> tuple[np.ndarray, float]:
        return z_full[:-1].reshape(nodes + 1, dim), float(z_full[-1])

    while True:
        if current.gradient_norm < opts.tol and s >= schedule.s_end:
            traj.stop_reason = "converged"
            break
        if s >= s_stop:
            traj.stop_reason = "s_max"
            break
        if traj.steps >= opts.max_steps:
            traj.stop_reason = "max_steps"
            break

        mu = current.mu
        g_z = red.basis.T @ _full_gradient(sys, current.w, current.sigma, mu)
        g_xi = inv_sqrt * g_z
        if opts.scheme == "split":
            hess = red.basis.T @ discrete_hessian(sys, current.w, current.sigma, mu) @ red.basis
            eigvals, eigvecs = np.linalg.eigh(inv_sqrt[:, None] * hess * inv_sqrt[None, :])
            signs = np.where(eigvals < 0, -1.0, 1.0)
            coords = eigvecs.T @ g_xi
            if schedule.locally_constant(s, opts.relax_ds):
                h_max = opts.relax_ds
            else:
                h_max = opts.step
                h = min(h, h_max)

        constant = schedule.locally_constant(s, h)
        while True:
            if opts.scheme == "split":
                d_xi = -h * (eigvecs @ (signs / (1.0 + h * np.abs(eigvals)) * coords))
            else:
                d_xi = -h * g_xi
            w_new, sigma_new = unpack(
                np.concatenate([current.w.reshape(-1), [current.sigma]]) + red.basis @ (inv_sqrt * d_xi)
            )
            w_new = _project(sys, w_new)
            s_new = s + h
            candidate = _state(sys, w_new, sigma_new, s_new, schedule.mu_at(s_new), red)
            if not constant:
                break
            if opts.scheme == "descent":
                worse = candidate.action > current.action + 1e-14 * (1.0 + abs(current.action))
            else:
                worse = candidate.gradient_norm > current.gradient_norm
            if not worse:
                break
            traj.rejected += 1
            h *= 0.5
            if h < opts.min_ds:
                break
        if constant and h < opts.min_ds:
            traj.stop_reason = "stalled"
            logger.warning(
                "Gradient flow stalled",
                extra={"system_id": sys.system_id, "s": s, "gradient_norm": current.gradient_norm},
            )
            break

        _check(candidate, opts)
        source = candidate.action - discrete_action(sys, candidate.w, candidate.sigma, mu)
        candidate.energy_so_far = current.energy_so_far + current.gradient_norm**2 * h
        candidate.source_so_far = current.source_so_far + source
        current, s = candidate, s_new
        traj.steps += 1
        if traj.steps % opts.snapshot_every == 0:
            traj.snapshots.append(current)
        logger.debug(
            "Flow step",
            extra={"s": s, "ds": h, "gradient_norm": current.gradient_norm, "action": current.action},
        )
        h = min(h * GROWTH, h_max)
        if opts.rho is not None and path_distance(current, start) > opts.rho:
            traj.stop_reason = "escaped"
            break

    if traj.snapshots[-1] is not current:
        traj.snapshots.append(current)
    logger.info(
        "Gradient flow finished",
        extra={
            "system_id": sys.system_id,
            "scheme": opts.scheme,
            "stop_reason": traj.stop_reason,
            "steps": traj.steps,
            "gradient_norm": current.gradient_norm,
            "energy": current.energy_so_far,
        },
    )
    return traj


def relax(sys: SystemDescriptor, y0: FlowPath, mu: float, opts: Optional[FlowOptions] = None) -> FlowPath:
    """Flow at fixed mu with the split scheme to a discrete critical point."""
    opts = (opts or FlowOptions()).model_copy(update={"scheme": "split", "rho": None})
    return flow(sys, y0, Schedule.constant(mu), opts).final


def energy_identity_defect(traj: FlowTrajectory) -> float:
    """|A_end - A_start - source + energy| / energy.

    Measures how far the discrete energy is from the action drop plus
    the explicit s-dependence.
    """
    first, last = traj.initial, traj.final
    change = last.action - first.action
    source = last.source_so_far - first.source_so_far
    energy = last.energy_so_far - first.energy_so_far
    return abs(change - source + energy) / max(energy, np.finfo(float).tiny)


def energy_bound(
    sys: SystemDescriptor,
    traj: FlowTrajectory,
    margin: float = 0.2,
) -> EnergyBoundReport:
    """Check E <= (1 + margin) 2 (mu1 - mu0) kappa c + max(0, A_start - A_end).

    kappa is the largest sigma along the snapshots and c the largest
    |H'_mu| over their nodes.
    """
    schedule = traj.schedule
    kappa = max(y.sigma for y in traj.snapshots)
    c = max(
        float(np.max(np.abs([sys.dh_dmu(x, y.mu) for x in y.w]))) for y in traj.snapshots
    )
    bound = 2.0 * abs(schedule.mu1 - schedule.mu0) * kappa * c
    drop = max(0.0, traj.initial.action - traj.final.action)
    energy = traj.energy
    passed = energy <= (1.0 + margin) * bound + drop
    if not passed:
        logger.warning(
            "Energy bound exceeded",
            extra={"system_id": sys.system_id, "energy": energy, "bound": bound, "action_drop": drop},
        )
    return EnergyBoundReport(
        energy=energy, kappa=kappa, c=c, bound=bound, action_drop=drop, margin=margin, passed=passed
    )
