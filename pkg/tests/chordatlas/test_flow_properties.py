"""Property-based tests for the flow engine.

**Validates: flow-engine invariants (flow property, energy conservation,
symplecticity, time rescaling)**

Feature: chord-atlas

Testing Configuration:
- Library: Hypothesis (Python)
- Tag format: Feature: chord-atlas, Property N: <property_text>
"""

import dataclasses

import numpy as np
from hypothesis import given, settings, strategies as st

from src.chordatlas.flow import integrate, integrate_with_variational
from src.chordatlas.phase import builtin_system

HENON_HEILES = builtin_system("henon_heiles")


# =============================================================================
# Hypothesis Strategies
# =============================================================================


@st.composite
def bounded_state(draw: st.DrawFn):
    """A Henon-Heiles state well below the escape energy."""
    coords = st.floats(min_value=-0.25, max_value=0.25, allow_nan=False)
    return np.array(draw(st.lists(coords, min_size=4, max_size=4)))


durations = st.floats(min_value=0.05, max_value=2.0)


# =============================================================================
# Property 5: Flow property
# =============================================================================


class TestFlowProperty:
    """
    Feature: chord-atlas, Property 5: Flow property

    *For any* bounded state x and times s, t the integrator SHALL satisfy
    phi^{s+t}(x) = phi^s(phi^t(x)) to ten times its tolerance.

    **Validates: flow-engine invariant "Flow property"**
    """

    @given(x=bounded_state(), s=durations, t=durations)
    @settings(max_examples=30, deadline=None)
    def test_semigroup(self, x, s, t):
        direct = integrate(HENON_HEILES, x, 0.0, s + t).final_state
        first = integrate(HENON_HEILES, x, 0.0, t).final_state
        composed = integrate(HENON_HEILES, first, 0.0, s).final_state
        np.testing.assert_allclose(composed, direct, atol=1e-8)


# =============================================================================
# Property 6: Energy conservation and symplecticity
# =============================================================================


class TestStructurePreservation:
    """
    Feature: chord-atlas, Property 6: Energy conservation and symplecticity

    *For any* bounded state the recorded energy drift SHALL stay below 1e-8
    and the monodromy SHALL satisfy M^T J M = J to 1e-6.

    **Validates: flow-engine invariants "Symplecticity" and max_h_drift**
    """

    @given(x=bounded_state(), t=durations)
    @settings(max_examples=30, deadline=None)
    def test_energy_drift(self, x, t):
        result = integrate(HENON_HEILES, x, 0.0, t)
        assert result.max_h_drift < 1e-8

    @given(x=bounded_state(), t=durations)
    @settings(max_examples=20, deadline=None)
    def test_monodromy_is_symplectic(self, x, t):
        result = integrate_with_variational(HENON_HEILES, x, 0.0, t)
        assert result.symplectic_defect < 1e-6
        assert abs(np.linalg.det(result.monodromy) - 1.0) < 1e-6


# =============================================================================
# Property 7: Time rescaling
# =============================================================================


class TestTimeRescaling:
    """
    Feature: chord-atlas, Property 7: Time rescaling

    *For any* state and tau > 0, flowing tau X_H over [0, 1] SHALL equal
    flowing X_H over [0, tau] at matched times.

    **Validates: flow-engine invariant "Reparametrization"**
    """

    @given(x=bounded_state(), tau=durations)
    @settings(max_examples=20, deadline=None)
    def test_scaled_field_matches_longer_flow(self, x, tau):
        scaled = dataclasses.replace(
            HENON_HEILES,
            h=lambda y, mu: tau * HENON_HEILES.h(y, mu),
            grad_h=lambda y, mu: tau * HENON_HEILES.grad_h(y, mu),
            hess_h=lambda y, mu: tau * HENON_HEILES.hess_h(y, mu),
        )
        unit_times = np.linspace(0.0, 1.0, 5)
        slow = integrate(scaled, x, 0.0, 1.0, sample_times=unit_times)
        fast = integrate(HENON_HEILES, x, 0.0, tau, sample_times=tau * unit_times)
        np.testing.assert_allclose(slow.states, fast.states, atol=1e-8)
