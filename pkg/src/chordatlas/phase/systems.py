"""Built-in Hamiltonian families.

Each builder returns an immutable SystemDescriptor with analytically coded
gradients and Hessians. Construction parameters are validated and kept in
descriptor.params together with any closed-form oracle values.

Systems:
- harmonic: H = (q^2 + p^2 - r^2)/2 - c*mu, n = 1
- henon_heiles: H = |p|^2/2 + |q|^2/2 + q1^2 q2 - q2^3/3 - mu - offset, n = 2
- rtbp_planar: rotating-frame restricted three-body problem with the Jacobi
  energy as family parameter, n = 2
- fold_quartic: H = p^2/2 + W(q) - W(q*) - eps*(mu_fold - mu), n = 1, whose
  two chords from the fiber {q = q*} to {p = 0} merge at mu_fold
"""

import dataclasses
import logging
import math
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.chordatlas.phase.models import (
    AffineLagrangian,
    LambdaChoice,
    SystemDescriptor,
    SystemParamsError,
)

logger = logging.getLogger(__name__)


def _params(name: str, given: Optional[Mapping[str, Any]], defaults: Dict[str, Any]) -> Dict[str, Any]:
    given = dict(given or {})
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise SystemParamsError(name, f"unknown parameters {unknown}")
    merged = {**defaults, **given}
    for key, value in merged.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SystemParamsError(name, f"parameter '{key}' must be a real number")
        if not math.isfinite(value):
            raise SystemParamsError(name, f"parameter '{key}' must be finite")
        merged[key] = float(value)
    return merged


def _plane(base: Sequence[float], *rows: Sequence[float]) -> AffineLagrangian:
    return AffineLagrangian.from_rows(base, rows)


# =============================================================================
# harmonic
# =============================================================================


def harmonic(params: Optional[Mapping[str, Any]] = None) -> SystemDescriptor:
    """Harmonic oscillator; every chord from {p = 0} to {q = 0} is a quarter circle."""
    p = _params("harmonic", params, {"radius": 1.0, "mu_coupling": 0.0})
    r2 = p["radius"] ** 2
    if r2 <= 0.0:
        raise SystemParamsError("harmonic", "radius must be positive")
    c = p["mu_coupling"]

    def h(x: np.ndarray, mu: float) -> float:
        return 0.5 * (x[0] ** 2 + x[1] ** 2 - r2) - c * mu

    def grad_h(x: np.ndarray, mu: float) -> np.ndarray:
        return np.array([x[0], x[1]], dtype=float)

    def hess_h(x: np.ndarray, mu: float) -> np.ndarray:
        return np.eye(2)

    return SystemDescriptor(
        system_id="harmonic",
        n=1,
        h=h,
        grad_h=grad_h,
        hess_h=hess_h,
        dh_dmu=lambda x, mu: -c,
        grad_dh_dmu=lambda x, mu: np.zeros(2),
        lambda_choice=LambdaChoice.SYMMETRIC,
        mu_range=(0.0, 1.0),
        lagrangians=(_plane([0.0, 0.0], [1.0, 0.0]), _plane([0.0, 0.0], [0.0, 1.0])),
        params=p,
    )


def harmonic_radius(sys: SystemDescriptor, mu: float) -> float:
    """Radius of Sigma_mu for the harmonic family."""
    return math.sqrt(sys.params["radius"] ** 2 + 2.0 * sys.params["mu_coupling"] * mu)


# =============================================================================
# henon_heiles
# =============================================================================


def henon_heiles(params: Optional[Mapping[str, Any]] = None) -> SystemDescriptor:
    """Henon-Heiles with symmetry plane {q1 = 0, p2 = 0}."""
    p = _params("henon_heiles", params, {"energy_offset": 0.0})
    offset = p["energy_offset"]

    def h(x: np.ndarray, mu: float) -> float:
        q1, q2, p1, p2 = x
        return 0.5 * (p1**2 + p2**2 + q1**2 + q2**2) + q1**2 * q2 - q2**3 / 3.0 - mu - offset

    def grad_h(x: np.ndarray, mu: float) -> np.ndarray:
        q1, q2, p1, p2 = x
        return np.array([q1 + 2.0 * q1 * q2, q2 + q1**2 - q2**2, p1, p2])

    def hess_h(x: np.ndarray, mu: float) -> np.ndarray:
        q1, q2, _, _ = x
        hess = np.eye(4)
        hess[0, 0] = 1.0 + 2.0 * q2
        hess[0, 1] = hess[1, 0] = 2.0 * q1
        hess[1, 1] = 1.0 - 2.0 * q2
        return hess

    plane = _plane([0.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0])
    return SystemDescriptor(
        system_id="henon_heiles",
        n=2,
        h=h,
        grad_h=grad_h,
        hess_h=hess_h,
        dh_dmu=lambda x, mu: -1.0,
        grad_dh_dmu=lambda x, mu: np.zeros(4),
        lambda_choice=LambdaChoice.SYMMETRIC,
        mu_range=(0.0, 1.0 / 6.0),
        lagrangians=(plane, plane),
        params=p,
    )


# =============================================================================
# rtbp_planar
# =============================================================================


def rtbp_planar(params: Optional[Mapping[str, Any]] = None) -> SystemDescriptor:
    """Planar circular restricted three-body problem in the rotating frame.

    H = |p|^2/2 + q2 p1 - q1 p2 - (1-m)/r1 - m/r2 + mu/2, with the heavy
    primary at (-m, 0) and the light one at (1-m, 0). The family parameter
    mu is the Jacobi energy c, so Sigma_mu is the level {Jacobi = c}.
    """
    p = _params("rtbp_planar", params, {"mass_ratio": 1e-3})
    m = p["mass_ratio"]
    if not 0.0 < m < 0.5:
        raise SystemParamsError("rtbp_planar", f"mass_ratio must lie in (0, 1/2), got {m}")
    primaries = ((1.0 - m, np.array([-m, 0.0])), (m, np.array([1.0 - m, 0.0])))

    def h(x: np.ndarray, mu: float) -> float:
        q, mom = x[:2], x[2:]
        value = 0.5 * (mom @ mom) + q[1] * mom[0] - q[0] * mom[1] + 0.5 * mu
        for k, centre in primaries:
            value -= k / np.linalg.norm(q - centre)
        return float(value)

    def grad_h(x: np.ndarray, mu: float) -> np.ndarray:
        q, mom = x[:2], x[2:]
        gq = np.array([-mom[1], mom[0]])
        for k, centre in primaries:
            d = q - centre
            gq = gq + k * d / np.linalg.norm(d) ** 3
        return np.concatenate([gq, [mom[0] + q[1], mom[1] - q[0]]])

    def hess_h(x: np.ndarray, mu: float) -> np.ndarray:
        q = x[:2]
        hqq = np.zeros((2, 2))
        for k, centre in primaries:
            d = q - centre
            r = np.linalg.norm(d)
            hqq += k * (np.eye(2) / r**3 - 3.0 * np.outer(d, d) / r**5)
        hess = np.zeros((4, 4))
        hess[:2, :2] = hqq
        hess[:2, 2:] = [[0.0, -1.0], [1.0, 0.0]]
        hess[2:, :2] = [[0.0, 1.0], [-1.0, 0.0]]
        hess[2:, 2:] = np.eye(2)
        return hess

    def singularity_distance(x: np.ndarray) -> float:
        return min(float(np.linalg.norm(x[:2] - centre)) for _, centre in primaries)

    plane = _plane([0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0])
    return SystemDescriptor(
        system_id="rtbp_planar",
        n=2,
        h=h,
        grad_h=grad_h,
        hess_h=hess_h,
        dh_dmu=lambda x, mu: 0.5,
        grad_dh_dmu=lambda x, mu: np.zeros(4),
        lambda_choice=LambdaChoice.SYMMETRIC,
        mu_range=(0.0, 6.0),
        lagrangians=(plane, plane),
        singularity_distance=singularity_distance,
        params=p,
    )


def kepler_seed(sys: SystemDescriptor, radius: float, retrograde: bool) -> Tuple[np.ndarray, float, float]:
    """Near-circular orbit seed around the heavy primary of rtbp_planar.

    Returns (u, tau, c): Lagrangian coordinates (q1, p2) of the start on the
    symmetry plane, the half-revolution time in the rotating frame and the
    Jacobi energy of the circular two-body orbit.
    """
    m = sys.params["mass_ratio"]
    speed = math.sqrt((1.0 - m) / radius)
    mean_motion = radius ** -1.5
    sign = -1.0 if retrograde else 1.0
    if not retrograde and mean_motion <= 1.0:
        raise SystemParamsError("rtbp_planar", "direct seeds need radius < 1")
    # p is the inertial velocity; the heavy primary itself moves with (0, -m).
    u = np.array([radius - m, sign * speed - m])
    tau = math.pi / (mean_motion + 1.0) if retrograde else math.pi / (mean_motion - 1.0)
    c = 1.0 / radius + sign * 2.0 * math.sqrt(radius)
    return u, tau, c


# =============================================================================
# fold_quartic
# =============================================================================


def fold_quartic(params: Optional[Mapping[str, Any]] = None) -> SystemDescriptor:
    """Quartic oscillator with a designed fold of the fiber-to-zero-section chords.

    Sigma_mu meets the fiber {q = q*} in p = +-sqrt(2 eps (mu_fold - mu)), so
    the two long chords ending at the left turning point merge at mu_fold.
    """
    p = _params("fold_quartic", params, {"q_star": 0.5, "epsilon": 1e-3, "mu_fold": 0.5})
    q_star, eps, mu_fold = p["q_star"], p["epsilon"], p["mu_fold"]
    if eps <= 0.0:
        raise SystemParamsError("fold_quartic", "epsilon must be positive")
    if q_star == 0.0:
        raise SystemParamsError("fold_quartic", "q_star must be non-zero")
    w_star = 0.5 * q_star**2 + 0.25 * q_star**4

    def h(x: np.ndarray, mu: float) -> float:
        q, mom = x
        return 0.5 * mom**2 + 0.5 * q**2 + 0.25 * q**4 - w_star - eps * (mu_fold - mu)

    def grad_h(x: np.ndarray, mu: float) -> np.ndarray:
        q, mom = x
        return np.array([q + q**3, mom])

    def hess_h(x: np.ndarray, mu: float) -> np.ndarray:
        return np.array([[1.0 + 3.0 * x[0] ** 2, 0.0], [0.0, 1.0]])

    return SystemDescriptor(
        system_id="fold_quartic",
        n=1,
        h=h,
        grad_h=grad_h,
        hess_h=hess_h,
        dh_dmu=lambda x, mu: eps,
        grad_dh_dmu=lambda x, mu: np.zeros(2),
        lambda_choice=LambdaChoice.STANDARD,
        mu_range=(0.0, 1.0),
        lagrangians=(_plane([q_star, 0.0], [0.0, 1.0]), _plane([0.0, 0.0], [1.0, 0.0])),
        params=p,
    )


def fold_start_momentum(sys: SystemDescriptor, mu: float) -> float:
    """|p| of the start point on the fiber; zero at and beyond the fold."""
    gap = sys.params["mu_fold"] - mu
    return math.sqrt(2.0 * sys.params["epsilon"] * gap) if gap > 0 else 0.0


def fold_mu_bisection(sys: SystemDescriptor, tol: float = 1e-13) -> float:
    """Locate the fold by bisection on mu of H_mu(q*, 0) = 0.

    Sigma_mu meets the fiber exactly when H_mu(q*, 0) <= 0.
    """
    base = sys.lagrangian(0).base_point
    lo, hi = sys.mu_range
    g = lambda mu: sys.h(base, mu)
    if g(lo) * g(hi) > 0:
        raise ValueError("fold is not bracketed by mu_range")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(lo) * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# =============================================================================
# Registry
# =============================================================================


BUILTIN_SYSTEMS: Dict[str, Callable[[Optional[Mapping[str, Any]]], SystemDescriptor]] = {
    "harmonic": harmonic,
    "henon_heiles": henon_heiles,
    "rtbp_planar": rtbp_planar,
    "fold_quartic": fold_quartic,
}


def builtin_system(
    name: str,
    params: Optional[Mapping[str, Any]] = None,
    *,
    lambda_choice: Optional[LambdaChoice] = None,
    mu_range: Optional[Tuple[float, float]] = None,
    lagrangians: Optional[Tuple[AffineLagrangian, AffineLagrangian]] = None,
) -> SystemDescriptor:
    """Build a named system, optionally overriding lambda, mu_range and planes.

    Raises:
        SystemParamsError: Unknown name or invalid parameters.
    """
    try:
        builder = BUILTIN_SYSTEMS[name]
    except KeyError:
        raise SystemParamsError(name, f"unknown system; choose from {sorted(BUILTIN_SYSTEMS)}")
    sys = builder(params)
    overrides: Dict[str, Any] = {}
    if lambda_choice is not None:
        overrides["lambda_choice"] = LambdaChoice(lambda_choice)
    if mu_range is not None:
        overrides["mu_range"] = tuple(mu_range)
    if lagrangians is not None:
        overrides["lagrangians"] = tuple(lagrangians)
    if overrides:
        sys = dataclasses.replace(sys, **overrides)
    logger.debug(
        "Built system",
        extra={"system_id": sys.system_id, "params": sys.params, "lambda": sys.lambda_choice.value},
    )
    return sys
