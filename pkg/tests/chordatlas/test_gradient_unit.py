"""Unit tests for cutoff schedules and the discretized gradient flow."""

import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from src.chordatlas.chords import ShootingGuess, ShootingOptions, newton_solve, shoot
from src.chordatlas.config import load_config
from src.chordatlas.gradient import (
    CutoffProfile,
    DivergenceError,
    FlowOptions,
    FlowPath,
    FlowTrajectory,
    Reduction,
    Schedule,
    SigmaFloorError,
    beta_r,
    cutoff_support,
    energy_bound,
    energy_identity_defect,
    fixed_beta,
    flow,
    gamma,
    path_distance,
    path_from_chord,
    relax,
    stretch_once,
    stretching_experiment,
)
from src.chordatlas.phase import ParameterRangeError, builtin_system

SHOOTING = ShootingOptions(samples=64)
CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


def _path(
    w, sigma: float, s: float = 0.0, mu: float = 0.0, action: float = 0.0, energy: float = 0.0, source: float = 0.0
) -> FlowPath:
    return FlowPath(
        w=np.asarray(w, dtype=float),
        sigma=sigma,
        s=s,
        mu=mu,
        action=action,
        gradient_norm=0.0,
        energy_so_far=energy,
        source_so_far=source,
    )


@pytest.fixture(scope="module")
def harmonic():
    return builtin_system("harmonic")


@pytest.fixture(scope="module")
def shift():
    return builtin_system("harmonic", {"mu_coupling": 1.0})


@pytest.fixture(scope="module")
def fold():
    return builtin_system("fold_quartic")


@pytest.fixture(scope="module")
def harmonic_chord(harmonic):
    return shoot(harmonic, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)


@pytest.fixture(scope="module")
def shift_chord(shift):
    return shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)


# -------------------------------------------------------------------------
# Cutoffs
# -------------------------------------------------------------------------
class TestCutoffs:

    @pytest.mark.parametrize("s,expected", [(-2.0, 0.0), (-1.0, 0.0), (0.0, 0.5), (1.0, 1.0), (3.0, 1.0)])
    def test_gamma(self, s, expected):
        assert gamma(s) == pytest.approx(expected)

    def test_small_stretch_is_scaled_bump(self):
        assert beta_r(0.5, 0.0) == pytest.approx(0.5)
        assert beta_r(0.5, -3.0) == 0.0
        assert beta_r(0.5, 3.0) == 0.0
        assert beta_r(0.0, 0.3) == 0.0

    def test_large_stretch_has_plateau(self):
        assert beta_r(3.0, -3.0) == 1.0
        assert beta_r(3.0, 2.9) == 1.0
        assert beta_r(3.0, 5.0) == 0.0
        assert 0.0 < beta_r(3.0, 4.0) < 1.0

    def test_branches_agree_at_unit_stretch(self):
        for s in np.linspace(-3.0, 3.0, 13):
            assert beta_r(1.0, s) == pytest.approx(beta_r(1.0 + 1e-12, s), abs=1e-9)

    def test_fixed_cutoff(self):
        assert fixed_beta(4.0, -4.0) == 0.0
        assert fixed_beta(4.0, -3.0) == pytest.approx(0.5)
        assert fixed_beta(4.0, 0.0) == 1.0
        assert fixed_beta(4.0, 2.0) == 1.0
        assert fixed_beta(4.0, 4.0) == 0.0

    def test_supports(self):
        assert cutoff_support("stretch", 0.5) == (-3.0, 3.0)
        assert cutoff_support("stretch", 3.0) == (-5.0, 5.0)
        assert cutoff_support("fixed", 2.0) == (-2.0, 2.0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError, match="R"):
            beta_r(-1.0, 0.0)
        with pytest.raises(ValueError, match="T"):
            fixed_beta(0.0, 0.0)
        with pytest.raises(ValueError, match="kind"):
            cutoff_support("smooth", 1.0)


class TestSchedule:

    def test_profile_validation(self):
        with pytest.raises(ValidationError):
            CutoffProfile(kind="fixed")
        with pytest.raises(ValidationError):
            CutoffProfile(kind="stretch")
        with pytest.raises(ValidationError):
            CutoffProfile(kind="ramp", T=1.0)

    def test_profile_peak(self):
        assert CutoffProfile().peak == 0.0
        assert CutoffProfile.stretch(0.4).peak == 0.4
        assert CutoffProfile.stretch(2.0).peak == 1.0
        assert CutoffProfile.fixed(1.0).peak == 1.0

    def test_constant_schedule(self):
        schedule = Schedule.constant(0.2)
        assert schedule.mu_at(-7.0) == schedule.mu_at(3.0) == 0.2
        assert (schedule.s_start, schedule.s_end) == (0.0, 0.0)
        assert schedule.locally_constant(0.0, 100.0)

    def test_stretch_schedule(self):
        schedule = Schedule(mu0=0.0, mu1=0.4, profile=CutoffProfile.stretch(2.0))
        assert schedule.mu_at(-10.0) == 0.0
        assert schedule.mu_at(0.0) == pytest.approx(0.4)
        assert schedule.mu_at(-3.0) == pytest.approx(0.2)
        assert (schedule.s_start, schedule.s_end) == (-4.0, 4.0)

    def test_locally_constant(self):
        schedule = Schedule(mu0=0.0, mu1=0.4, profile=CutoffProfile.stretch(2.0))
        assert schedule.locally_constant(-100.0, 1.0)
        assert schedule.locally_constant(-1.0, 2.0)
        assert not schedule.locally_constant(-4.5, 1.0)


class TestFlowOptions:

    def test_default_steps(self):
        assert FlowOptions().step == 0.05
        assert FlowOptions(scheme="descent").step == 1e-3
        assert FlowOptions(scheme="descent", ds=0.01).step == 0.01
        assert FlowOptions().relax_ds == 10.0

    @pytest.mark.parametrize("kwargs", [{"scheme": "rk4"}, {"tol": 0.0}, {"snapshot_every": 0}, {"beta": 1}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            FlowOptions(**kwargs)


# -------------------------------------------------------------------------
# Paths
# -------------------------------------------------------------------------
class TestPaths:

    def test_reduction_dimensions(self, harmonic):
        red = Reduction.for_system(harmonic, 4)
        assert red.basis.shape == (11, 9)
        assert red.weights.shape == (9,)
        assert red.weights[0] == pytest.approx(0.125)
        assert red.weights[-1] == 1.0

    def test_reduction_needs_two_intervals(self, harmonic):
        with pytest.raises(ValueError, match="2 path intervals"):
            Reduction.for_system(harmonic, 1)

    def test_path_from_chord_subsamples(self, harmonic, harmonic_chord):
        y = path_from_chord(harmonic, harmonic_chord, 16)
        assert y.nodes == 16
        assert y.sigma == harmonic_chord.tau
        np.testing.assert_allclose(y.w, harmonic_chord.samples[::4], atol=1e-9)
        assert y.w[0, 1] == pytest.approx(0.0, abs=1e-15)
        assert y.w[-1, 0] == pytest.approx(0.0, abs=1e-15)
        assert y.action == pytest.approx(math.pi / 4, abs=1e-2)

    def test_path_from_chord_interpolates(self, harmonic, harmonic_chord):
        y = path_from_chord(harmonic, harmonic_chord, 10)
        assert y.w.shape == (11, 2)
        radii = np.linalg.norm(y.w, axis=1)
        np.testing.assert_allclose(radii, 1.0, atol=1e-4)

    def test_path_distance(self):
        a = _path([[0.0, 0.0], [1.0, 0.0]], 1.0)
        b = _path([[0.0, 0.5], [1.0, 0.0]], 1.25)
        assert path_distance(a, b) == pytest.approx(0.75)


# -------------------------------------------------------------------------
# Flow
# -------------------------------------------------------------------------
class TestDescentFlow:

    @pytest.fixture(scope="class")
    def trajectory(self, harmonic, harmonic_chord):
        y0 = path_from_chord(harmonic, harmonic_chord, 8)
        y0.w = 1.2 * y0.w
        opts = FlowOptions(scheme="descent", max_steps=300)
        return flow(harmonic, y0, Schedule.constant(0.0), opts)

    def test_stops_on_step_budget(self, trajectory):
        assert trajectory.stop_reason == "max_steps"
        assert trajectory.steps == 300
        assert len(trajectory.snapshots) == 301

    def test_action_decreases(self, trajectory):
        actions = [y.action for y in trajectory.snapshots]
        for before, after in zip(actions, actions[1:]):
            assert after <= before + 1e-12 * (1.0 + abs(before))
        assert actions[-1] < actions[0]

    def test_energy_matches_action_drop(self, trajectory):
        assert trajectory.energy > 0
        assert trajectory.final.source_so_far == 0.0
        assert energy_identity_defect(trajectory) < 0.05

    def test_boundary_stays_on_lagrangians(self, trajectory):
        for y in trajectory.snapshots:
            assert y.w[0, 1] == pytest.approx(0.0, abs=1e-14)
            assert y.w[-1, 0] == pytest.approx(0.0, abs=1e-14)

    def test_escape(self, harmonic, harmonic_chord):
        y0 = path_from_chord(harmonic, harmonic_chord, 8)
        y0.w = 1.2 * y0.w
        traj = flow(harmonic, y0, Schedule.constant(0.0), FlowOptions(scheme="descent", rho=1e-4))
        assert traj.stop_reason == "escaped"
        assert path_distance(traj.final, traj.initial) > 1e-4

    def test_snapshot_stride(self, harmonic, harmonic_chord):
        y0 = path_from_chord(harmonic, harmonic_chord, 8)
        y0.w = 1.2 * y0.w
        opts = FlowOptions(scheme="descent", max_steps=10, snapshot_every=4)
        traj = flow(harmonic, y0, Schedule.constant(0.0), opts)
        assert [round(y.s / 1e-3) for y in traj.snapshots] == [0, 4, 8, 10]


class TestFlowFailures:

    def test_sigma_floor(self, harmonic):
        y0 = _path(np.zeros((5, 2)), 0.01)
        with pytest.raises(SigmaFloorError) as exc_info:
            flow(harmonic, y0, Schedule.constant(0.0), FlowOptions(scheme="descent"))
        assert exc_info.value.sigma <= 1e-4

    def test_divergence_bound(self, harmonic, harmonic_chord):
        y0 = path_from_chord(harmonic, harmonic_chord, 8)
        with pytest.raises(DivergenceError):
            flow(harmonic, y0, Schedule.constant(0.0), FlowOptions(divergence_norm=0.5))

    def test_schedule_outside_range(self, harmonic, harmonic_chord):
        y0 = path_from_chord(harmonic, harmonic_chord, 8)
        with pytest.raises(ParameterRangeError):
            flow(harmonic, y0, Schedule(mu0=0.0, mu1=5.0), FlowOptions())


class TestRelax:

    def test_reaches_discrete_critical_point(self, harmonic, harmonic_chord):
        y0 = path_from_chord(harmonic, harmonic_chord, 16)
        y = relax(harmonic, y0, 0.0)
        assert y.gradient_norm < 1e-8
        assert y.sigma == pytest.approx(math.pi / 2, abs=1e-2)
        assert y.action == pytest.approx(math.pi / 4, abs=1e-2)


# -------------------------------------------------------------------------
# Energy monitors
# -------------------------------------------------------------------------
class TestEnergyMonitors:

    def _trajectory(self, energy: float) -> FlowTrajectory:
        w = [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]]
        return FlowTrajectory(
            schedule=Schedule(mu0=0.0, mu1=0.1, profile=CutoffProfile.stretch(2.0)),
            scheme="split",
            snapshots=[
                _path(w, 1.5, s=-4.0, mu=0.0, action=1.0),
                _path(w, 2.0, s=4.0, mu=0.0, action=0.9, energy=energy, source=-0.1),
            ],
        )

    def test_bound_holds(self, shift):
        report = energy_bound(shift, self._trajectory(0.5))
        assert report.kappa == 2.0
        assert report.c == pytest.approx(1.0)
        assert report.bound == pytest.approx(0.4)
        assert report.action_drop == pytest.approx(0.1)
        assert report.passed

    def test_bound_exceeded(self, shift):
        assert not energy_bound(shift, self._trajectory(0.7)).passed

    def test_identity_defect(self):
        # change -0.1, source -0.1, energy 0.5: |-0.1 + 0.1 + 0.5| / 0.5
        assert energy_identity_defect(self._trajectory(0.5)) == pytest.approx(1.0)
        assert energy_identity_defect(self._trajectory(0.0)) == 0.0


# -------------------------------------------------------------------------
# Stretching
# -------------------------------------------------------------------------
class TestStretching:

    def test_zero_stretch_parks_at_seed(self, shift, shift_chord):
        reports = stretching_experiment(shift, shift_chord, 0.1, [0.0], nodes=16)
        assert len(reports) == 1
        report = reports[0]
        assert report.R == 0.0
        assert report.outcome == "parked"
        assert report.plateau_state is None
        assert math.isinf(report.plateau_min_gradient)
        assert report.energy < 1e-6

    def test_escape_from_tight_ball(self, shift, shift_chord):
        y0 = path_from_chord(shift, shift_chord, 8)
        report = stretch_once(shift, y0, 0.0, 0.4, 2.0, FlowOptions(rho=1e-6))
        assert report.outcome == "escaped"
        assert report.trajectory.stop_reason == "escaped"

    def test_target_distance(self, shift, shift_chord):
        y0 = path_from_chord(shift, shift_chord, 8)
        report = stretch_once(shift, y0, 0.0, 0.4, 0.5, FlowOptions(max_steps=400), target=y0)
        assert report.outcome == "parked"
        if report.plateau_state is not None:
            assert report.distance_to_target is not None
        else:
            assert report.distance_to_target is None

    @pytest.mark.slow
    def test_shipped_shift_run_converges_for_large_stretch(self):
        cfg = load_config(CONFIG_DIR / "harmonic_shift.toml")
        grad = cfg.gradient
        system = cfg.system.build()
        shooting = cfg.solver.shooting_options()
        seed = shoot(system, grad.mu0, grad.seed, shooting)
        target = shoot(system, grad.mu1, grad.target, shooting)
        short_run, long_run = stretching_experiment(
            system, seed, grad.mu1, [5.0, 20.0], grad.nodes, grad.flow_options(), grad.plateau_tol, target
        )
        assert short_run.outcome == "parked"
        assert long_run.outcome == "converged"
        assert long_run.plateau_min_gradient < grad.plateau_tol
        assert long_run.plateau_state.mu == pytest.approx(grad.mu1)
        assert long_run.distance_to_target is not None

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "mu0,mu1,R",
        [
            (0.30, 0.31, 0.5),
            (0.30, 0.31, 2.0),
            (0.30, 0.33, 1.0),
            (0.30, 0.35, 0.5),
            (0.30, 0.35, 2.0),
            (0.32, 0.34, 1.0),
            (0.32, 0.36, 3.0),
            (0.35, 0.36, 0.5),
            (0.35, 0.38, 2.0),
            (0.35, 0.40, 1.0),
        ],
    )
    def test_fold_family_energy_within_bound(self, fold, mu0, mu1, R):
        seed = shoot(fold, mu0, ShootingGuess(u=[-0.02], tau=2.8), SHOOTING)
        (report,) = stretching_experiment(fold, seed, mu1, [R], nodes=64)
        bound = energy_bound(fold, report.trajectory)
        assert report.energy > 0.0
        assert bound.c == pytest.approx(1e-3)
        assert bound.passed


class TestRelaxPerturbed:

    def test_perturbed_chord_relaxes_and_reshoots(self, harmonic, harmonic_chord):
        y0 = path_from_chord(harmonic, harmonic_chord, 32)
        t = np.linspace(0.0, 1.0, 33)
        bump = 1e-2 * np.column_stack([np.sin(np.pi * t), np.sin(2.0 * np.pi * t)])
        perturbed = dataclasses.replace(y0, w=y0.w + bump, sigma=y0.sigma + 1e-2)
        y = relax(harmonic, perturbed, 0.0)
        assert y.gradient_norm < 1e-8
        assert path_distance(y, relax(harmonic, y0, 0.0)) < 1e-5
        u = harmonic.lagrangian(0).coordinates(y.w[0])
        _, tau, iterations, norm = newton_solve(harmonic, 0.0, u, y.sigma, SHOOTING)
        assert iterations <= 5
        assert norm < SHOOTING.newton_tol
        assert tau == pytest.approx(math.pi / 2, abs=1e-8)
