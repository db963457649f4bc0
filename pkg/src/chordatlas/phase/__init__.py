"""Exact symplectic model space, Hamiltonian families and contact checks.

Models:
- PhaseState, AffineLagrangian, SystemDescriptor, LambdaChoice
- SamplerConfig, ContactReport

Geometry:
- hamiltonian_vector_field, liouville_field, contact_function
- lagrangian_exactness_check, never_tangent_margin, check_derivatives

Systems:
- builtin_system and the individual builders
"""

from src.chordatlas.phase.contact import contact_check, project_to_level
from src.chordatlas.phase.geometry import (
    DerivativeCheck,
    check_derivatives,
    contact_function,
    hamiltonian_vector_field,
    lagrangian_exactness_check,
    lambda_form,
    lambda_matrix,
    liouville_field,
    never_tangent_margin,
    omega,
    omega_matrix,
    symplectic_j,
)
from src.chordatlas.phase.models import (
    AffineLagrangian,
    ContactReport,
    LambdaChoice,
    ParameterRangeError,
    PhaseState,
    SamplerConfig,
    SystemDescriptor,
    SystemParamsError,
    as_vector,
)
from src.chordatlas.phase.systems import (
    BUILTIN_SYSTEMS,
    builtin_system,
    fold_mu_bisection,
    fold_quartic,
    fold_start_momentum,
    harmonic,
    harmonic_radius,
    henon_heiles,
    kepler_seed,
    rtbp_planar,
)

__all__ = [
    # Models
    "PhaseState",
    "AffineLagrangian",
    "SystemDescriptor",
    "LambdaChoice",
    "SamplerConfig",
    "ContactReport",
    "as_vector",
    # Errors
    "ParameterRangeError",
    "SystemParamsError",
    # Geometry
    "symplectic_j",
    "omega_matrix",
    "lambda_matrix",
    "omega",
    "lambda_form",
    "hamiltonian_vector_field",
    "liouville_field",
    "contact_function",
    "lagrangian_exactness_check",
    "never_tangent_margin",
    "check_derivatives",
    "DerivativeCheck",
    # Contact
    "contact_check",
    "project_to_level",
    # Systems
    "BUILTIN_SYSTEMS",
    "builtin_system",
    "harmonic",
    "harmonic_radius",
    "henon_heiles",
    "rtbp_planar",
    "kepler_seed",
    "fold_quartic",
    "fold_start_momentum",
    "fold_mu_bisection",
]
