"""Rabinowitz action functional and its contact-type estimates."""

from src.chordatlas.rabinowitz.estimates import (
    action_bounds_check,
    action_mu_derivative,
    family_action_envelope,
)
from src.chordatlas.rabinowitz.functional import (
    ActionEvaluation,
    action,
    discrete_action,
    discrete_differential,
    discrete_gradient,
    discrete_hessian,
    euclidean_gradient,
    evaluate_action,
    gradient_norm,
    h_prime_mean,
    node_weights,
)
from src.chordatlas.rabinowitz.models import (
    ActionRecord,
    ContactFailedError,
    EnvelopeMember,
    EnvelopeReport,
    FamilyPoint,
)

__all__ = [
    # Models
    "ActionRecord",
    "EnvelopeMember",
    "EnvelopeReport",
    "FamilyPoint",
    "ActionEvaluation",
    "ContactFailedError",
    # Functional
    "action",
    "evaluate_action",
    "discrete_action",
    "discrete_differential",
    "euclidean_gradient",
    "discrete_gradient",
    "discrete_hessian",
    "gradient_norm",
    "node_weights",
    "h_prime_mean",
    # Estimates
    "action_bounds_check",
    "action_mu_derivative",
    "family_action_envelope",
]
