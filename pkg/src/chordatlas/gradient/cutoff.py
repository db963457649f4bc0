"""Cutoff functions for time-dependent action functionals.

gamma is the C^1 smoothstep ramp: 0 for s <= -1, 1 for s >= 1 and
3v^2 - 2v^3 with v = (s + 1) / 2 in between.

beta_R for R in [0, 1] is R gamma(2 + s) for s <= 0 and R gamma(2 - s) for
s >= 0 (support [-3, 3]). For R >= 1 it is gamma(1 + s + R) for s <= 0 and
gamma(1 - s + R) for s >= 0 (support [-(R + 2), R + 2], equal to 1 on
[-R, R]). Both branches agree at R = 1.
"""

from typing import Tuple


def gamma(s: float) -> float:
    if s <= -1.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    v = 0.5 * (s + 1.0)
    return v * v * (3.0 - 2.0 * v)


def beta_r(R: float, s: float) -> float:
    """The stretching family beta_R(s)."""
    if R < 0:
        raise ValueError(f"R must be non-negative, got {R!r}")
    if R <= 1.0:
        return R * (gamma(2.0 + s) if s <= 0 else gamma(2.0 - s))
    return gamma(1.0 + s + R) if s <= 0 else gamma(1.0 - s + R)


def fixed_beta(T: float, s: float) -> float:
    """Ramp up on [-T, -T/2], 1 on [-T/2, T/2], ramp down on [T/2, T]."""
    if T <= 0:
        raise ValueError(f"T must be positive, got {T!r}")
    quarter = 0.25 * T
    if s <= 0:
        return gamma((s + 3.0 * quarter) / quarter)
    return gamma((3.0 * quarter - s) / quarter)


def cutoff_support(kind: str, size: float) -> Tuple[float, float]:
    """[s_start, s_end] of a cutoff: size is T for "fixed" and R for "stretch"."""
    if kind == "fixed":
        return -size, size
    if kind == "stretch":
        half = 3.0 if size <= 1.0 else size + 2.0
        return -half, half
    raise ValueError(f"unknown cutoff kind {kind!r}")
