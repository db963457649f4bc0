"""Adaptive integration of the Hamiltonian flow and its variational equations.

Both entry points drive one scipy RK45 (Dormand-Prince 5(4)) solver step by
step, so collisions and non-finite states are caught at the step where they
occur and samples are taken from the step's dense output.

The variational state is laid out as

    y = [x (2n) | M row-major (4n^2) | dx/dmu (2n, optional)]

with x' = J grad H, M' = J Hess H M and (dx/dmu)' = J Hess H dx/dmu + J grad H'_mu.

Requirements:
- Default tolerances rtol 1e-10 and atol 1e-12.
- Trajectories stop with CollisionFloorError when singularity_distance < floor.
- Sample times must lie in [0, t_final]; t = 0 is always the first sample.
"""

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import RK45

from src.chordatlas.flow.models import (
    CollisionFloorError,
    FlowResult,
    IntegratorOptions,
    NonFiniteStateError,
    StepSizeUnderflowError,
)
from src.chordatlas.phase.geometry import symplectic_j
from src.chordatlas.phase.models import StateLike, SystemDescriptor, as_vector

logger = logging.getLogger(__name__)

# Relative step used when H'_mu has no coded gradient
SENSITIVITY_FD_STEP = 1e-6


def _sample_grid(t_final: float, sample_times: Optional[Sequence[float]]) -> Optional[np.ndarray]:
    if sample_times is None:
        return None
    grid = np.asarray(sample_times, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("sample_times must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("sample_times must be strictly increasing")
    if grid[0] < 0 or grid[-1] > t_final * (1 + 1e-12):
        raise ValueError(f"sample_times must lie in [0, {t_final}]")
    if grid[0] > 0:
        grid = np.concatenate([[0.0], grid])
    return grid


def _rhs(
    sys: SystemDescriptor, mu: float, variational: bool, sensitivity: bool
) -> Callable[[float, np.ndarray], np.ndarray]:
    dim = 2 * sys.n
    jmat = symplectic_j(sys.n)

    if sys.grad_dh_dmu is not None:
        grad_dmu = sys.grad_dh_dmu
    else:
        def grad_dmu(x: np.ndarray, mu_: float) -> np.ndarray:
            step = SENSITIVITY_FD_STEP * max(1.0, abs(mu_))
            return (sys.grad_h(x, mu_ + step) - sys.grad_h(x, mu_ - step)) / (2.0 * step)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        x = y[:dim]
        xdot = jmat @ sys.grad_h(x, mu)
        if not variational:
            return xdot
        dxh = jmat @ sys.hess_h(x, mu)
        m = y[dim : dim + dim * dim].reshape(dim, dim)
        parts = [xdot, (dxh @ m).ravel()]
        if sensitivity:
            s = y[dim + dim * dim :]
            parts.append(dxh @ s + jmat @ grad_dmu(x, mu))
        return np.concatenate(parts)

    return rhs


def _run(
    sys: SystemDescriptor,
    x0: StateLike,
    mu: float,
    t_final: float,
    opts: Optional[IntegratorOptions],
    sample_times: Optional[Sequence[float]],
    variational: bool,
    sensitivity: bool,
) -> FlowResult:
    mu = sys.check_mu(mu)
    opts = opts or IntegratorOptions()
    if not (t_final > 0 and math.isfinite(t_final)):
        raise ValueError(f"t_final must be positive and finite, got {t_final!r}")
    x0 = as_vector(x0)
    dim = 2 * sys.n
    if x0.size != dim:
        raise ValueError(f"x0 must have length {dim}, got {x0.size}")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteStateError(0.0)

    y0 = [x0]
    if variational:
        y0.append(np.eye(dim).ravel())
        if sensitivity:
            y0.append(np.zeros(dim))
    y0 = np.concatenate(y0)

    h0 = sys.h(x0, mu)
    grid = _sample_grid(t_final, sample_times)
    times = [0.0]
    samples = [y0.copy()]
    next_sample = 1
    max_drift = 0.0

    def guard(t: float, y: np.ndarray) -> None:
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError(t)
        if sys.singularity_distance is not None:
            distance = sys.singularity_distance(y[:dim])
            if distance < opts.collision_floor:
                raise CollisionFloorError(t, distance, opts.collision_floor)

    guard(0.0, y0)
    solver = RK45(
        _rhs(sys, mu, variational, sensitivity),
        0.0,
        y0,
        t_final,
        rtol=opts.rtol,
        atol=opts.atol,
        max_step=opts.max_step,
    )
    accepted = 0
    while solver.status == "running":
        message = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflowError(solver.t, str(message))
        accepted += 1
        guard(solver.t, solver.y)
        max_drift = max(max_drift, abs(sys.h(solver.y[:dim], mu) - h0))

        if grid is None:
            times.append(solver.t)
            samples.append(solver.y.copy())
            continue
        if next_sample < grid.size and grid[next_sample] <= solver.t:
            dense = solver.dense_output()
            while next_sample < grid.size and grid[next_sample] <= solver.t:
                t_s = grid[next_sample]
                y_s = solver.y.copy() if t_s == solver.t else dense(t_s)
                times.append(float(t_s))
                samples.append(y_s)
                max_drift = max(max_drift, abs(sys.h(y_s[:dim], mu) - h0))
                next_sample += 1

    if grid is not None and next_sample < grid.size:
        # Roundoff can leave the last requested time a hair past the end.
        times.append(float(grid[-1]))
        samples.append(solver.y.copy())

    rejected = max(0, (solver.nfev - 2) // 6 - accepted)
    stacked = np.array(samples)
    monodromy = sens = defect = None
    sample_m = None
    if variational:
        sample_m = stacked[:, dim : dim + dim * dim].reshape(-1, dim, dim)
        monodromy = solver.y[dim : dim + dim * dim].reshape(dim, dim).copy()
        jmat = symplectic_j(sys.n)
        defect = float(np.max(np.abs(monodromy.T @ jmat @ monodromy - jmat)))
        if sensitivity:
            sens = solver.y[dim + dim * dim :].copy()

    logger.debug(
        "Integration finished",
        extra={
            "system_id": sys.system_id,
            "mu": mu,
            "t_final": t_final,
            "accepted": accepted,
            "rejected": rejected,
            "h_drift": max_drift,
        },
    )
    return FlowResult(
        times=np.array(times),
        states=stacked[:, :dim].copy(),
        monodromy=monodromy,
        sensitivity=sens,
        steps_accepted=accepted,
        steps_rejected=rejected,
        max_h_drift=max_drift,
        symplectic_defect=defect,
        sample_monodromies=sample_m,
    )


def integrate(
    sys: SystemDescriptor,
    x0: StateLike,
    mu: float,
    t_final: float,
    opts: Optional[IntegratorOptions] = None,
    sample_times: Optional[Sequence[float]] = None,
) -> FlowResult:
    """Integrate dx/dt = X_H(x) from x0 over [0, t_final].

    Without sample_times the accepted step points are returned.

    Raises:
        StepSizeUnderflowError, CollisionFloorError, NonFiniteStateError
    """
    return _run(sys, x0, mu, t_final, opts, sample_times, variational=False, sensitivity=False)


def integrate_with_variational(
    sys: SystemDescriptor,
    x0: StateLike,
    mu: float,
    t_final: float,
    opts: Optional[IntegratorOptions] = None,
    sample_times: Optional[Sequence[float]] = None,
    parameter_sensitivity: bool = False,
) -> FlowResult:
    """Integrate the flow together with M' = DX_H M, M(0) = I.

    With parameter_sensitivity the 2n-vector d(phi^t)/d(mu) is co-integrated.
    """
    return _run(
        sys,
        x0,
        mu,
        t_final,
        opts,
        sample_times,
        variational=True,
        sensitivity=parameter_sensitivity,
    )
