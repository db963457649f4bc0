"""Unit tests for the Rabinowitz action, its discrete gradient and the contact estimates."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from src.chordatlas.chords import Chord, ShootingGuess, ShootingOptions, shoot
from src.chordatlas.flow import IntegratorOptions
from src.chordatlas.phase import ContactReport, builtin_system, kepler_seed
from src.chordatlas.rabinowitz import (
    ContactFailedError,
    action,
    action_bounds_check,
    action_mu_derivative,
    discrete_action,
    discrete_gradient,
    euclidean_gradient,
    evaluate_action,
    family_action_envelope,
    gradient_norm,
    h_prime_mean,
    node_weights,
)


def _report(mu: float = 0.0, kappa: float = 2.0, passed: bool = True, dh_dmu_max: float = 0.0) -> ContactReport:
    return ContactReport(
        mu=mu,
        f_min=1.0 / kappa,
        f_max=kappa,
        kappa=kappa,
        sample_count=100 if passed else 0,
        dh_dmu_max=dh_dmu_max,
        passed=passed,
    )


def _point(mu: float, action_value: float, tau: float = math.pi / 2) -> SimpleNamespace:
    return SimpleNamespace(mu=mu, action=action_value, tau=tau)


@pytest.fixture
def harmonic():
    return builtin_system("harmonic")


@pytest.fixture
def harmonic_chord(harmonic):
    return shoot(harmonic, 0.0, ShootingGuess(u=[1.0], tau=1.5))


@pytest.fixture
def shift():
    return builtin_system("harmonic", {"mu_coupling": 1.0})


# -------------------------------------------------------------------------
# Action
# -------------------------------------------------------------------------
class TestAction:

    def test_harmonic_quarter_circle(self, harmonic, harmonic_chord):
        assert action(harmonic, harmonic_chord) == pytest.approx(math.pi / 4, abs=1e-6)

    def test_midpoint_alone_is_second_order(self, harmonic, harmonic_chord):
        evaluation = evaluate_action(harmonic, harmonic_chord)
        assert evaluation.coarse is not None
        assert abs(evaluation.midpoint - math.pi / 4) < 1e-4
        assert abs(evaluation.extrapolated - math.pi / 4) <= abs(evaluation.midpoint - math.pi / 4)

    def test_odd_grid_skips_extrapolation(self, harmonic):
        chord = shoot(harmonic, 0.0, ShootingGuess(u=[1.0], tau=1.5), ShootingOptions(samples=33))
        evaluation = evaluate_action(harmonic, chord)
        assert evaluation.coarse is None
        assert evaluation.extrapolated == evaluation.midpoint

    def test_constant_path_on_level(self, harmonic):
        path = np.tile([1.0, 0.0], (9, 1))
        assert discrete_action(harmonic, path, 3.7, 0.0) == 0.0

    def test_action_equals_period_for_unit_contact_function(self):
        # Symmetric lambda on the circle of radius sqrt(2): f = (q^2 + p^2) / 2 = 1.
        sys = builtin_system("harmonic", {"radius": math.sqrt(2.0)})
        chord = shoot(sys, 0.0, ShootingGuess(u=[1.4], tau=1.5))
        assert action(sys, chord) == pytest.approx(chord.tau, abs=1e-8)

    def test_shift_family_action(self, shift):
        chord = shoot(shift, 0.5, ShootingGuess(u=[1.4], tau=1.6))
        assert action(shift, chord) == pytest.approx(math.pi / 2, abs=1e-6)

    def test_rejects_single_node(self, harmonic):
        with pytest.raises(ValueError, match="shape"):
            discrete_action(harmonic, np.zeros((1, 2)), 1.0, 0.0)

    def test_node_weights(self):
        weights = node_weights(4)
        np.testing.assert_allclose(weights, [0.125, 0.25, 0.25, 0.25, 0.125])
        assert weights.sum() == pytest.approx(1.0)

    def test_h_prime_mean(self, shift):
        chord = shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), ShootingOptions(samples=8))
        assert h_prime_mean(shift, chord) == pytest.approx(-1.0)


# -------------------------------------------------------------------------
# Discrete gradient
# -------------------------------------------------------------------------
class TestDiscreteGradient:

    def test_vanishes_at_chord(self, harmonic, harmonic_chord):
        w_hat, sigma_hat = discrete_gradient(harmonic, harmonic_chord.samples, harmonic_chord.tau, 0.0)
        assert gradient_norm(w_hat, sigma_hat) < 1e-4

    def test_boundary_components_are_tangent(self, harmonic):
        rng = np.random.default_rng(3)
        path = rng.normal(size=(6, 2))
        w_hat, _ = discrete_gradient(harmonic, path, 1.2, 0.0)
        # L_0 = {p = 0} and L_1 = {q = 0}
        assert w_hat[0, 1] == pytest.approx(0.0, abs=1e-14)
        assert w_hat[-1, 0] == pytest.approx(0.0, abs=1e-14)

    def test_sigma_component_is_minus_mean_h(self, harmonic):
        path = np.tile([2.0, 0.0], (5, 1))
        _, sigma_hat = discrete_gradient(harmonic, path, 1.0, 0.0)
        assert sigma_hat == pytest.approx(-1.5)

    def test_gradient_detects_wrong_period(self, harmonic, harmonic_chord):
        w_hat, sigma_hat = discrete_gradient(harmonic, harmonic_chord.samples, 1.0, 0.0)
        assert gradient_norm(w_hat, sigma_hat) > 0.1

    def test_euclidean_gradient_shape(self, harmonic):
        g, g_sigma = euclidean_gradient(harmonic, np.zeros((5, 2)), 1.0, 0.0)
        assert g.shape == (5, 2)
        assert g_sigma == pytest.approx(0.5)


# -------------------------------------------------------------------------
# Contact estimates
# -------------------------------------------------------------------------
class TestActionBounds:

    def test_harmonic_boundary_case(self, harmonic, harmonic_chord):
        record = action_bounds_check(harmonic, harmonic_chord, _report(kappa=2.0))
        assert record.passed
        assert record.bounds[0] == pytest.approx(math.pi / 4, abs=1e-9)
        assert record.bounds[1] == pytest.approx(math.pi, abs=1e-9)
        assert record.kappa_used == 2.0
        assert record.d_action_d_mu is None

    def test_unit_kappa_equality(self):
        sys = builtin_system("harmonic", {"radius": math.sqrt(2.0)})
        chord = shoot(sys, 0.0, ShootingGuess(u=[1.4], tau=1.5))
        record = action_bounds_check(sys, chord, _report(kappa=1.0), d_action_d_mu=0.0)
        assert record.passed
        assert record.bounds[0] == record.bounds[1] == chord.tau
        assert record.d_action_d_mu == 0.0

    def test_flags_action_outside_bounds(self, harmonic, harmonic_chord):
        # With kappa 1.1 the lower bound tau / kappa exceeds pi / 4.
        record = action_bounds_check(harmonic, harmonic_chord, _report(kappa=1.1))
        assert not record.passed

    def test_failed_contact_raises(self, harmonic, harmonic_chord):
        with pytest.raises(ContactFailedError) as exc_info:
            action_bounds_check(harmonic, harmonic_chord, _report(passed=False))
        assert exc_info.value.mu == 0.0


class TestActionMuDerivative:

    def test_parameter_free_family(self, harmonic):
        chord = shoot(harmonic, 0.5, ShootingGuess(u=[1.0], tau=1.5))
        analytic, finite = action_mu_derivative(harmonic, chord)
        assert abs(analytic) < 1e-8
        assert abs(finite) < 1e-8

    def test_shift_family(self, shift):
        chord = shoot(shift, 0.5, ShootingGuess(u=[1.4], tau=1.6))
        analytic, finite = action_mu_derivative(shift, chord)
        assert analytic == pytest.approx(chord.tau, rel=1e-12)
        assert finite == pytest.approx(analytic, rel=1e-4)

    def test_one_sided_at_range_end(self, shift):
        chord = shoot(shift, 1.0, ShootingGuess(u=[1.7], tau=1.6))
        analytic, finite = action_mu_derivative(shift, chord, dmu=1e-4)
        assert finite == pytest.approx(analytic, rel=1e-3)

    def test_rejects_non_positive_step(self, harmonic, harmonic_chord):
        with pytest.raises(ValueError, match="dmu"):
            action_mu_derivative(harmonic, harmonic_chord, dmu=0.0)

    @pytest.mark.slow
    def test_rtbp_family_member(self):
        sys = builtin_system("rtbp_planar")
        u, tau, c = kepler_seed(sys, 0.23, retrograde=True)
        opts = ShootingOptions(samples=256, integrator=IntegratorOptions(rtol=1e-11, atol=1e-13))
        chord = shoot(sys, c, ShootingGuess(u=[float(v) for v in u], tau=tau), opts)
        analytic, finite = action_mu_derivative(sys, chord, dmu=1e-4, opts=opts)
        # H'_mu = 1/2 everywhere
        assert analytic == pytest.approx(-0.5 * chord.tau, rel=1e-12)
        assert finite == pytest.approx(analytic, rel=1e-3)


class TestFamilyEnvelope:

    def test_constant_action_is_tight(self):
        members = [_point(0.0, 1.0), _point(0.1, 1.0), _point(0.2, 1.0)]
        report = family_action_envelope(members, [_report()])
        assert report.passed
        assert len(report.members) == 2
        assert report.kappa == pytest.approx(2.1)

    def test_shift_family_grows_within_envelope(self):
        mus = [0.0, 0.05, 0.1, 0.2]
        members = [_point(mu, (1 + 2 * mu) * math.pi / 4) for mu in mus]
        contacts = [_report(mu=mu, kappa=max((1 + 2 * mu) / 2, 2 / (1 + 2 * mu)), dh_dmu_max=1.0) for mu in mus]
        report = family_action_envelope(members, contacts)
        assert report.passed
        for member in report.members:
            assert member.action_lower <= member.action <= member.action_upper
            assert member.c0 <= member.tau <= member.c1

    def test_flags_runaway_action(self):
        members = [_point(0.0, 1.0), _point(0.01, 10.0)]
        report = family_action_envelope(members, [_report()], kappa_margin=0.0)
        assert not report.passed
        assert not report.members[0].action_passed
        assert report.members[0].period_passed

    def test_dh_dmu_enters_kappa(self):
        report = family_action_envelope([_point(0.0, 1.0)], [_report(kappa=1.0, dh_dmu_max=3.0)], 0.0)
        assert report.kappa == 3.0

    def test_failed_contact_raises(self):
        with pytest.raises(ContactFailedError):
            family_action_envelope([_point(0.0, 1.0)], [_report(), _report(passed=False)])

    @pytest.mark.parametrize(
        "members,contacts,match",
        [
            ([], [None], "member"),
            ([SimpleNamespace(mu=0.0, action=1.0, tau=1.0)], [], "contact"),
            ([SimpleNamespace(mu=0.0, action=-1.0, tau=1.0)], [None], "positive"),
        ],
    )
    def test_rejects_bad_input(self, members, contacts, match):
        contacts = [_report() for _ in contacts]
        with pytest.raises(ValueError, match=match):
            family_action_envelope(members, contacts)


class TestChordRecords:

    def test_chord_guess_round_trip(self, harmonic_chord):
        assert isinstance(harmonic_chord, Chord)
        assert harmonic_chord.guess.u == pytest.approx([1.0])
