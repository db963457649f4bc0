"""Phase-space models for one-parameter Hamiltonian families.

This module defines the data models shared by every solver in the package:
- PhaseState: A point (q, p) of R^{2n}
- LambdaChoice: The two supported primitives of omega
- AffineLagrangian: An affine Lagrangian plane used as a boundary condition
- SystemDescriptor: A Hamiltonian family H(., mu) with derivatives and planes
- SamplerConfig / ContactReport: Input and output of the contact check

Conventions:
- Coordinates are x = (q_1..q_n, p_1..p_n).
- omega = sum dp_i ^ dq_i, so omega(u, w) = u_p . w_q - u_q . w_p.
- X_H = (dH/dp, -dH/dq) = J grad H with J = [[0, I], [-I, 0]].

Numeric containers are frozen dataclasses over numpy arrays; records that
are persisted or validated from config use Pydantic.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


# Absolute tolerance for the Lagrangian condition omega(u, w) = 0
LAGRANGIAN_TOLERANCE = 1e-12


class ParameterRangeError(ValueError):
    """Raised when a family parameter lies outside the system's mu_range."""

    def __init__(self, mu: float, mu_range: Tuple[float, float]):
        self.mu = mu
        self.mu_range = mu_range
        super().__init__(
            f"mu={mu!r} outside mu_range [{mu_range[0]!r}, {mu_range[1]!r}]"
        )


class SystemParamsError(ValueError):
    """Raised when a built-in system is requested with invalid parameters."""

    def __init__(self, system: str, reason: str):
        self.system = system
        self.reason = reason
        super().__init__(f"Invalid parameters for system '{system}': {reason}")


class LambdaChoice(str, Enum):
    """Primitive one-form lambda with d(lambda) = omega.

    Attributes:
        STANDARD: lambda = p dq, Liouville field Y = (0, p).
        SYMMETRIC: lambda = (p dq - q dp) / 2, Liouville field Y = (q, p) / 2.
    """

    STANDARD = "standard"
    SYMMETRIC = "symmetric"


StateLike = Union["PhaseState", np.ndarray, Sequence[float]]


def as_vector(x: StateLike) -> np.ndarray:
    """Return the flat (q, p) vector of a state-like value."""
    if isinstance(x, PhaseState):
        return x.vector
    return np.asarray(x, dtype=float).reshape(-1)


@dataclass(frozen=True)
class PhaseState:
    """A point (q, p) of the model phase space R^{2n}.

    Attributes:
        q: Positions, length n.
        p: Momenta, length n.
    """

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape or q.size == 0:
            raise ValueError(
                f"q and p must be non-empty and of equal length, got {q.size} and {p.size}"
            )
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("PhaseState entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return int(self.q.size)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, x: Sequence[float]) -> "PhaseState":
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size % 2:
            raise ValueError(f"phase vector must have even length, got {x.size}")
        n = x.size // 2
        return cls(q=x[:n], p=x[n:])


def _orthonormal_columns(basis: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(basis)
    diag = np.diag(r)
    if np.min(np.abs(diag)) < 1e-12:
        raise ValueError("tangent basis vectors are not linearly independent")
    # column k keeps the orientation of basis vector k
    return q * np.sign(diag)


@dataclass(frozen=True, eq=False)
class AffineLagrangian:
    """Affine Lagrangian plane L = base_point + span(tangent_basis).

    The basis is stored as the columns of a (2n x n) matrix and is
    orthonormalized at construction. The complementary normal frame is
    derived once and used for signed distances.

    Attributes:
        base_point: A point of the plane, length 2n.
        tangent_basis: Orthonormal tangent basis, shape (2n, n).
        normal_frame: Orthonormal basis of the Euclidean complement, shape (2n, n).
    """

    base_point: np.ndarray
    tangent_basis: np.ndarray
    normal_frame: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        base = as_vector(self.base_point)
        basis = np.array(self.tangent_basis, dtype=float)
        if basis.ndim != 2 or basis.shape[0] != base.size:
            raise ValueError(
                f"tangent_basis must have shape (2n, n) with 2n={base.size}, got {basis.shape}"
            )
        n = base.size // 2
        if basis.shape[1] != n:
            raise ValueError(f"a Lagrangian plane needs n={n} basis vectors, got {basis.shape[1]}")
        if not np.all(np.isfinite(base)):
            raise ValueError("base_point must be finite")
        basis = _orthonormal_columns(basis)
        # omega(u, w) = u_p . w_q - u_q . w_p
        gram = basis[n:].T @ basis[:n] - basis[:n].T @ basis[n:]
        if np.max(np.abs(gram)) > LAGRANGIAN_TOLERANCE:
            raise ValueError(
                f"plane is not Lagrangian: max |omega(b_i, b_j)| = {np.max(np.abs(gram)):.3e}"
            )
        full, _, _ = np.linalg.svd(basis, full_matrices=True)
        object.__setattr__(self, "base_point", base)
        object.__setattr__(self, "tangent_basis", basis)
        object.__setattr__(self, "normal_frame", full[:, n:])

    @classmethod
    def from_rows(
        cls, base_point: Sequence[float], rows: Sequence[Sequence[float]]
    ) -> "AffineLagrangian":
        """Build a plane from a base point and basis vectors given as rows."""
        return cls(
            base_point=np.asarray(base_point, dtype=float),
            tangent_basis=np.asarray(rows, dtype=float).T,
        )

    @property
    def dimension(self) -> int:
        return int(self.tangent_basis.shape[1])

    def point(self, u: Sequence[float]) -> np.ndarray:
        """Point of the plane with Lagrangian coordinates u."""
        return self.base_point + self.tangent_basis @ np.asarray(u, dtype=float)

    def coordinates(self, x: StateLike) -> np.ndarray:
        """Lagrangian coordinates of the orthogonal projection of x."""
        return self.tangent_basis.T @ (as_vector(x) - self.base_point)

    def project(self, x: StateLike) -> np.ndarray:
        return self.point(self.coordinates(x))

    def project_tangent(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of a vector onto the tangent space."""
        return self.tangent_basis @ (self.tangent_basis.T @ v)

    def signed_distances(self, x: StateLike) -> np.ndarray:
        """Signed distances of x from the plane along the normal frame."""
        return self.normal_frame.T @ (as_vector(x) - self.base_point)

    def distance(self, x: StateLike) -> float:
        return float(np.linalg.norm(self.signed_distances(x)))


ScalarField = Callable[[np.ndarray, float], float]
VectorField = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class SystemDescriptor:
    """One-parameter Hamiltonian family with boundary planes.

    Callables take the flat (q, p) vector and the parameter mu. The
    descriptor is immutable and safe to share between worker threads.

    Attributes:
        system_id: Stable identifier written into atlases and reports.
        n: Degrees of freedom.
        h: The Hamiltonian H_mu.
        grad_h: Gradient of H_mu in (q, p) order.
        hess_h: Hessian of H_mu, shape (2n, 2n).
        dh_dmu: Parameter derivative H'_mu.
        lambda_choice: Primitive of omega used for actions and contact.
        mu_range: Closed interval of admissible parameters.
        lagrangians: The boundary planes (L_0, L_1).
        grad_dh_dmu: Optional gradient of H'_mu for parameter sensitivities.
        singularity_distance: Optional distance to the nearest singularity
            of H, used for the integrator's collision floor.
        params: Construction parameters, kept for provenance.
    """

    system_id: str
    n: int
    h: ScalarField
    grad_h: VectorField
    hess_h: VectorField
    dh_dmu: ScalarField
    lambda_choice: LambdaChoice
    mu_range: Tuple[float, float]
    lagrangians: Tuple[AffineLagrangian, AffineLagrangian]
    grad_dh_dmu: Optional[VectorField] = None
    singularity_distance: Optional[Callable[[np.ndarray], float]] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        lo, hi = (float(v) for v in self.mu_range)
        if not lo <= hi:
            raise ValueError(f"mu_range must satisfy lo <= hi, got {self.mu_range}")
        object.__setattr__(self, "mu_range", (lo, hi))
        if len(self.lagrangians) != 2:
            raise ValueError("exactly two Lagrangian planes are required")
        for plane in self.lagrangians:
            if plane.base_point.size != 2 * self.n:
                raise ValueError(
                    f"plane dimension {plane.base_point.size} does not match 2n={2 * self.n}"
                )

    def check_mu(self, mu: float) -> float:
        """Return mu if it lies in mu_range (with roundoff slack), else raise."""
        lo, hi = self.mu_range
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        if not (lo - slack <= mu <= hi + slack) or math.isnan(mu):
            raise ParameterRangeError(mu, self.mu_range)
        return float(mu)

    def lagrangian(self, which: int) -> AffineLagrangian:
        if which not in (0, 1):
            raise ValueError(f"which must be 0 or 1, got {which!r}")
        return self.lagrangians[which]


# =============================================================================
# Contact check records
# =============================================================================


class SamplerConfig(BaseModel):
    """Configuration of the level-set sampler used by the contact check.

    Points are laid out on a grid (odd count per axis) or drawn uniformly
    from an axis-aligned box in R^{2n}, and Newton-projected onto the zero level
    along grad H. An optional disc in q-space restricts accepted samples to one
    component of the level set.
    """

    model_config = ConfigDict(extra="forbid")

    mode: Literal["grid", "random"] = Field("grid", description="Cloud layout")
    samples: int = Field(400, gt=0, description="Number of cloud points drawn")
    seed: int = Field(0, description="Seed for numpy.random.default_rng")
    min_accepted: int = Field(50, gt=0, description="Minimum projected samples")
    max_iter: int = Field(25, gt=0, description="Newton projection iterations")
    tol: float = Field(1e-10, gt=0, description="Projection tolerance on |H|")
    box_center: Optional[List[float]] = Field(None, description="Cloud center, length 2n")
    box_half_width: Union[float, List[float]] = Field(1.5, description="Cloud half widths")
    region_center: Optional[List[float]] = Field(None, description="q-space disc center")
    region_radius: Optional[float] = Field(None, gt=0, description="q-space disc radius")
    max_reported_violations: int = Field(50, ge=0)

    @field_validator("box_half_width")
    @classmethod
    def validate_half_width(cls, v: Union[float, List[float]]) -> Union[float, List[float]]:
        widths = [v] if isinstance(v, (int, float)) else v
        if not widths or any(w <= 0 for w in widths):
            raise ValueError("box_half_width entries must be positive")
        return v


class ContactReport(BaseModel):
    """Outcome of sampling the contact function f = dH(Y) on Sigma_mu.

    Attributes:
        mu: Parameter at which Sigma_mu was sampled.
        f_min: Minimum of f over accepted samples.
        f_max: Maximum of f over accepted samples.
        kappa: max(f_max, 1/f_min) clamped to >= 1; infinite on violation.
        sample_count: Number of accepted (projected) samples.
        violations: Sampled states (q, p) with f <= 0.
        violation_count: Total number of violating samples.
        dh_dmu_max: Largest |H'_mu| over the accepted samples.
        passed: True iff no violations and enough samples were accepted.
    """

    mu: float
    f_min: float
    f_max: float
    kappa: float = Field(..., ge=1.0)
    sample_count: int = Field(..., ge=0)
    violations: List[List[float]] = Field(default_factory=list)
    violation_count: int = 0
    dh_dmu_max: float = 0.0
    passed: bool

    @property
    def violation_states(self) -> List[PhaseState]:
        return [PhaseState.from_vector(v) for v in self.violations]
