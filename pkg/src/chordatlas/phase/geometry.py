"""Symplectic and Liouville geometry of the model space R^{2n}.

The coordinate convention is fixed here and nowhere else:

    omega(u, w) = u_p . w_q - u_q . w_p = u^T Omega w,   Omega = [[0, -I], [I, 0]]
    X_H = J grad H,                                         J = [[0, I], [-I, 0]]

so that dH(u) = omega(u, X_H). A primitive lambda is stored as a matrix
Lambda with lambda(x)(u) = x^T Lambda u and Lambda - Lambda^T = Omega.

Requirements:
- hamiltonian_vector_field rejects mu outside mu_range.
- liouville_field satisfies omega(Y, u) = lambda(u) for both lambda choices.
- lagrangian_exactness_check evaluates lambda on tangent vectors at the base
  point and at base_point + b for every basis vector b.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from src.chordatlas.phase.models import (
    AffineLagrangian,
    LambdaChoice,
    StateLike,
    SystemDescriptor,
    as_vector,
)

logger = logging.getLogger(__name__)

# Tolerance for lambda|_L = 0
EXACTNESS_TOLERANCE = 1e-10


@lru_cache(maxsize=16)
def _symplectic_j(n: int) -> np.ndarray:
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -np.eye(n)
    j.setflags(write=False)
    return j


def symplectic_j(n: int) -> np.ndarray:
    """The matrix J with X_H = J grad H (read-only)."""
    return _symplectic_j(int(n))


def omega_matrix(n: int) -> np.ndarray:
    """The matrix Omega with omega(u, w) = u^T Omega w."""
    return -symplectic_j(n)


@lru_cache(maxsize=16)
def _lambda_matrix(choice: LambdaChoice, n: int) -> np.ndarray:
    lam = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    if choice is LambdaChoice.STANDARD:
        lam[n + idx, idx] = 1.0
    else:
        lam[n + idx, idx] = 0.5
        lam[idx, n + idx] = -0.5
    lam.setflags(write=False)
    return lam


def lambda_matrix(choice: LambdaChoice, n: int) -> np.ndarray:
    """Matrix Lambda of the primitive, lambda(x)(u) = x^T Lambda u."""
    return _lambda_matrix(LambdaChoice(choice), int(n))


def omega(u: np.ndarray, w: np.ndarray) -> float:
    """Symplectic pairing omega(u, w) = u_p . w_q - u_q . w_p."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    n = u.size // 2
    return float(u[n:] @ w[:n] - u[:n] @ w[n:])


def lambda_form(sys: SystemDescriptor, x: StateLike, u: np.ndarray) -> float:
    """Evaluate the primitive lambda at x on the tangent vector u."""
    x = as_vector(x)
    return float(x @ lambda_matrix(sys.lambda_choice, sys.n) @ np.asarray(u, dtype=float))


def hamiltonian_vector_field(sys: SystemDescriptor, x: StateLike, mu: float) -> np.ndarray:
    """Return X_H(x) = (dH/dp, -dH/dq) for H = H_mu.

    Raises:
        ParameterRangeError: If mu lies outside sys.mu_range.
    """
    mu = sys.check_mu(mu)
    return symplectic_j(sys.n) @ sys.grad_h(as_vector(x), mu)


def liouville_field(sys: SystemDescriptor, x: StateLike) -> np.ndarray:
    """Liouville field Y defined by lambda = omega(Y, .).

    Standard lambda gives Y = (0, p), Symmetric gives Y = (q, p) / 2.
    """
    x = as_vector(x)
    n = sys.n
    if LambdaChoice(sys.lambda_choice) is LambdaChoice.STANDARD:
        return np.concatenate([np.zeros(n), x[n:]])
    return 0.5 * x


def contact_function(sys: SystemDescriptor, x: StateLike, mu: float) -> float:
    """Contact function f = dH(Y) at x (no level-set check)."""
    x = as_vector(x)
    return float(sys.grad_h(x, float(mu)) @ liouville_field(sys, x))


def lagrangian_exactness_check(sys: SystemDescriptor, which: int) -> bool:
    """True iff lambda vanishes on the tangent space of the chosen plane.

    The check is evaluated at the base point and at base_point + b for each
    tangent basis vector b; lambda is linear in x so this covers the plane.
    """
    plane = sys.lagrangian(which)
    lam = lambda_matrix(sys.lambda_choice, sys.n)
    points = [plane.base_point] + [plane.base_point + b for b in plane.tangent_basis.T]
    worst = max(float(np.max(np.abs(x @ lam @ plane.tangent_basis))) for x in points)
    exact = worst <= EXACTNESS_TOLERANCE
    if not exact:
        logger.debug(
            "Plane is not exact for the chosen primitive",
            extra={"system_id": sys.system_id, "which": which, "max_lambda": worst},
        )
    return exact


def never_tangent_margin(
    sys: SystemDescriptor, x: StateLike, mu: float, plane: AffineLagrangian
) -> float:
    """Normalized transversality of X_H to a plane at x.

    Returns max over unit tangent basis vectors u of |omega(X_H, u)| / |X_H|.
    A zero margin means X_H is tangent to the Legendrian L cap Sigma at x.
    """
    xh = hamiltonian_vector_field(sys, x, mu)
    norm = np.linalg.norm(xh)
    if norm == 0.0:
        return 0.0
    xh = xh / norm
    return max(abs(omega(xh, b)) for b in plane.tangent_basis.T)


# =============================================================================
# Finite-difference self-check
# =============================================================================


@dataclass(frozen=True)
class DerivativeCheck:
    """Worst relative errors of the coded derivatives against finite differences."""

    grad_error: float
    hess_error: float
    dh_dmu_error: float
    grad_dh_dmu_error: Optional[float]
    samples: int

    def passed(self, rel_tol: float = 1e-5) -> bool:
        errors = [self.grad_error, self.dh_dmu_error]
        if self.grad_dh_dmu_error is not None:
            errors.append(self.grad_dh_dmu_error)
        return all(e <= rel_tol for e in errors) and self.hess_error <= 10 * rel_tol


def _relative(approx: np.ndarray, exact: np.ndarray) -> float:
    return float(np.max(np.abs(approx - exact)) / max(float(np.max(np.abs(exact))), 1.0))


def check_derivatives(
    sys: SystemDescriptor,
    rng: np.random.Generator,
    mu: float,
    center: np.ndarray,
    half_width: float,
    samples: int = 20,
    step: float = 1e-6,
) -> DerivativeCheck:
    """Compare grad_h, hess_h and dh_dmu with central differences of h.

    States are drawn uniformly from the box center +- half_width. Relative
    errors are scaled by max(|exact|, 1).
    """
    sys.check_mu(mu)
    center = as_vector(center)
    dim = 2 * sys.n
    eye = np.eye(dim)
    grad_err = hess_err = dmu_err = 0.0
    gdmu_err: Optional[float] = 0.0 if sys.grad_dh_dmu is not None else None

    for _ in range(samples):
        x = center + rng.uniform(-half_width, half_width, size=dim)
        fd_grad = np.array(
            [(sys.h(x + step * e, mu) - sys.h(x - step * e, mu)) / (2 * step) for e in eye]
        )
        grad_err = max(grad_err, _relative(fd_grad, sys.grad_h(x, mu)))

        fd_hess = np.column_stack(
            [(sys.grad_h(x + step * e, mu) - sys.grad_h(x - step * e, mu)) / (2 * step) for e in eye]
        )
        hess_err = max(hess_err, _relative(fd_hess, sys.hess_h(x, mu)))

        fd_dmu = (sys.h(x, mu + step) - sys.h(x, mu - step)) / (2 * step)
        dmu_err = max(dmu_err, _relative(np.array([fd_dmu]), np.array([sys.dh_dmu(x, mu)])))

        if sys.grad_dh_dmu is not None:
            fd_gdmu = (sys.grad_h(x, mu + step) - sys.grad_h(x, mu - step)) / (2 * step)
            gdmu_err = max(gdmu_err, _relative(fd_gdmu, sys.grad_dh_dmu(x, mu)))

    return DerivativeCheck(
        grad_error=grad_err,
        hess_error=hess_err,
        dh_dmu_error=dmu_err,
        grad_dh_dmu_error=gdmu_err,
        samples=samples,
    )
