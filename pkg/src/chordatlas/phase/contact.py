"""Sampling check of the contact condition dH(Y) > 0 on Sigma_mu.

A point cloud (grid or uniform random) is Newton-projected onto the zero
level of H_mu along grad H. The contact function f = dH(Y) is evaluated on
every successfully projected sample and summarised in a ContactReport.

Requirements:
- Newton projection: at most sampler.max_iter iterations, tolerance sampler.tol.
- Fewer than sampler.min_accepted projected samples is reported as a failure.
- kappa = max(f_max, 1/f_min) clamped to >= 1; infinite when f <= 0 anywhere.
"""

import itertools
import logging
import math
from typing import Iterator, Optional

import numpy as np

from src.chordatlas.phase.geometry import contact_function
from src.chordatlas.phase.models import ContactReport, SamplerConfig, SystemDescriptor

logger = logging.getLogger(__name__)

# Samples closer than this to a singularity of H are discarded
SINGULARITY_MARGIN = 1e-3


def _box(sys: SystemDescriptor, sampler: SamplerConfig) -> tuple[np.ndarray, np.ndarray]:
    dim = 2 * sys.n
    center = np.zeros(dim) if sampler.box_center is None else np.asarray(sampler.box_center, float)
    if center.size != dim:
        raise ValueError(f"box_center must have length {dim}, got {center.size}")
    widths = np.broadcast_to(np.asarray(sampler.box_half_width, dtype=float), (dim,)).copy()
    return center, widths


def _cloud(sys: SystemDescriptor, sampler: SamplerConfig) -> Iterator[np.ndarray]:
    """Yield raw sample points before projection."""
    center, widths = _box(sys, sampler)
    dim = center.size
    if sampler.mode == "random":
        rng = np.random.default_rng(sampler.seed)
        for _ in range(sampler.samples):
            yield center + rng.uniform(-widths, widths)
        return
    # Odd per-axis counts keep the box center on the grid.
    per_axis = max(3, math.ceil(sampler.samples ** (1.0 / dim)))
    if per_axis % 2 == 0:
        per_axis += 1
    axes = [np.linspace(c - w, c + w, per_axis) for c, w in zip(center, widths)]
    for point in itertools.product(*axes):
        yield np.array(point)


def project_to_level(
    sys: SystemDescriptor, x: np.ndarray, mu: float, max_iter: int, tol: float
) -> Optional[np.ndarray]:
    """Newton-project x onto {H_mu = 0} along grad H; None if it fails."""
    for _ in range(max_iter + 1):
        with np.errstate(all="ignore"):
            value = sys.h(x, mu)
            if not math.isfinite(value):
                return None
            if abs(value) < tol:
                return x
            grad = sys.grad_h(x, mu)
            norm2 = float(grad @ grad)
            if not math.isfinite(norm2) or norm2 < 1e-28:
                return None
            x = x - (value / norm2) * grad
        if not np.all(np.isfinite(x)):
            return None
    return None


def _in_region(sys: SystemDescriptor, x: np.ndarray, sampler: SamplerConfig) -> bool:
    if sys.singularity_distance is not None and sys.singularity_distance(x) < SINGULARITY_MARGIN:
        return False
    if sampler.region_radius is None:
        return True
    center = np.zeros(sys.n) if sampler.region_center is None else np.asarray(sampler.region_center)
    return float(np.linalg.norm(x[: sys.n] - center)) <= sampler.region_radius


def contact_check(
    sys: SystemDescriptor, mu: float, sampler: Optional[SamplerConfig] = None
) -> ContactReport:
    """Sample Sigma_mu and summarise the contact function on it."""
    mu = sys.check_mu(mu)
    sampler = sampler or SamplerConfig()

    f_values: list[float] = []
    dmu_values: list[float] = []
    violations: list[list[float]] = []
    violation_count = 0

    for raw in _cloud(sys, sampler):
        x = project_to_level(sys, raw, mu, sampler.max_iter, sampler.tol)
        if x is None or not _in_region(sys, x, sampler):
            continue
        f = contact_function(sys, x, mu)
        f_values.append(f)
        dmu_values.append(abs(sys.dh_dmu(x, mu)))
        if f <= 0.0:
            violation_count += 1
            if len(violations) < sampler.max_reported_violations:
                violations.append([float(v) for v in x])

    accepted = len(f_values)
    if accepted == 0:
        f_min = f_max = math.nan
    else:
        f_min, f_max = min(f_values), max(f_values)

    if violation_count or accepted == 0:
        kappa = math.inf
    else:
        kappa = max(1.0, f_max, 1.0 / f_min)

    passed = violation_count == 0 and accepted >= sampler.min_accepted
    report = ContactReport(
        mu=mu,
        f_min=f_min,
        f_max=f_max,
        kappa=kappa,
        sample_count=accepted,
        violations=violations,
        violation_count=violation_count,
        dh_dmu_max=max(dmu_values, default=0.0),
        passed=passed,
    )

    if accepted < sampler.min_accepted:
        logger.warning(
            "Too few samples projected onto the level set",
            extra={"system_id": sys.system_id, "mu": mu, "accepted": accepted},
        )
    elif violation_count:
        logger.warning(
            "Contact condition violated on sampled level set",
            extra={"system_id": sys.system_id, "mu": mu, "violations": violation_count},
        )
    else:
        logger.info(
            "Contact condition holds on sampled level set",
            extra={"system_id": sys.system_id, "mu": mu, "kappa": kappa, "samples": accepted},
        )
    return report
