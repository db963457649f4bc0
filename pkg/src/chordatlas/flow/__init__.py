"""Hamiltonian flow and variational equations.

- integrate: Adaptive RK5(4) trajectory with optional dense sampling
- integrate_with_variational: Trajectory plus monodromy (and d/dmu)
"""

from src.chordatlas.flow.integrator import integrate, integrate_with_variational
from src.chordatlas.flow.models import (
    CollisionFloorError,
    FlowResult,
    IntegrationError,
    IntegratorOptions,
    NonFiniteStateError,
    StepSizeUnderflowError,
)

__all__ = [
    "FlowResult",
    "IntegratorOptions",
    "integrate",
    "integrate_with_variational",
    # Errors
    "IntegrationError",
    "StepSizeUnderflowError",
    "CollisionFloorError",
    "NonFiniteStateError",
]
