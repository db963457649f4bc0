"""Nondegeneracy test for chords.

A chord is nondegenerate iff dphi^tau T(L_0 cap Sigma) meets T(L_1 cap Sigma)
only in zero. Each T(L_i cap Sigma) = T L_i cap ker dH has dimension n - 1;
the test is the smallest singular value of the 2n x (2n - 2) matrix of
normalized columns [dphi^tau K_0 | K_1]. For n = 1 the spaces are points and
that value is reported as 1.

The shooting Jacobian is singular at every fold of a family, so its
column-normalized smallest singular value also enters sigma_min.
"""

import logging
from typing import Optional

import numpy as np

from src.chordatlas.chords.models import Chord, DimensionError, NondegReport, ShootingOptions
from src.chordatlas.chords.shooting import evaluate_shooting
from src.chordatlas.phase.geometry import never_tangent_margin, symplectic_j
from src.chordatlas.phase.models import AffineLagrangian, SystemDescriptor

logger = logging.getLogger(__name__)

# |grad H| below this at an endpoint means the endpoint is not regular
REGULARITY_FLOOR = 1e-12


def _legendrian_basis(plane: AffineLagrangian, grad: np.ndarray) -> np.ndarray:
    """Orthonormal basis (2n x (n-1)) of T L cap ker dH."""
    g = plane.tangent_basis.T @ grad
    _, _, vt = np.linalg.svd(g.reshape(1, -1))
    return plane.tangent_basis @ vt[1:].T


def _normalized(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=0)
    norms[norms == 0.0] = 1.0
    return a / norms


def _sigma_min(a: np.ndarray) -> float:
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def nondegeneracy(
    sys: SystemDescriptor,
    chord: Chord,
    threshold: float = 1e-6,
    opts: Optional[ShootingOptions] = None,
) -> NondegReport:
    """Evaluate the nondegeneracy criterion at a converged chord.

    Raises:
        DimensionError: grad H vanishes at an endpoint.
    """
    mu = chord.mu
    x0, x1 = chord.start, chord.end
    grads = [sys.grad_h(x0, mu), sys.grad_h(x1, mu)]
    for endpoint, grad in enumerate(grads):
        norm = float(np.linalg.norm(grad))
        if norm < REGULARITY_FLOOR:
            raise DimensionError(endpoint, norm)

    l0, l1 = sys.lagrangians
    monodromy = chord.monodromy
    if monodromy is None:
        monodromy = evaluate_shooting(sys, mu, chord.u, chord.tau, opts).flow.monodromy

    n = sys.n
    if n == 1:
        transversality = 1.0
    else:
        k0 = _legendrian_basis(l0, grads[0])
        k1 = _legendrian_basis(l1, grads[1])
        transversality = _sigma_min(_normalized(np.hstack([monodromy @ k0, k1])))

    jac = np.zeros((n + 1, n + 1))
    jac[:n, :n] = l1.normal_frame.T @ monodromy @ l0.tangent_basis
    jac[:n, n] = l1.normal_frame.T @ (symplectic_j(n) @ grads[1])
    jac[n, :n] = grads[0] @ l0.tangent_basis
    shooting_sigma = _sigma_min(_normalized(jac))
    det = float(np.linalg.det(jac))

    margins = [
        never_tangent_margin(sys, x0, mu, l0),
        never_tangent_margin(sys, x1, mu, l1),
    ]
    sigma = min(transversality, shooting_sigma)
    report = NondegReport(
        sigma_min=sigma,
        transversality_sigma_min=transversality,
        shooting_sigma_min=shooting_sigma,
        shooting_jac_det=det,
        never_tangent_margin=margins,
        threshold=threshold,
        degenerate=sigma < threshold,
    )
    if report.degenerate:
        logger.info(
            "Chord is degenerate",
            extra={"system_id": sys.system_id, "mu": mu, "sigma_min": sigma},
        )
    return report
