"""Unit tests for family continuation, event location and limit diagnostics."""

import math
from pathlib import Path
from typing import List

import numpy as np
import pytest
from pydantic import ValidationError

from src.chordatlas.chords import ShootingGuess, ShootingOptions, shoot
from src.chordatlas.config import load_config
from src.chordatlas.continuation import (
    AtlasRow,
    ContinuationOptions,
    EventKind,
    FamilyAtlas,
    FamilyEvent,
    SeedDegenerateError,
    aitken_limit,
    census_guesses,
    contact_events,
    continue_family,
    detect_events,
    limit_census,
    omega_probe,
    verify_rows,
)
from src.chordatlas.events import EventEmitter, EventType, RunEvent
from src.chordatlas.phase import ContactReport, builtin_system, fold_mu_bisection

SHOOTING = ShootingOptions(samples=64)
CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


class _RecordingEmitter(EventEmitter):
    def __init__(self):
        self.events: List[RunEvent] = []

    def emit(self, event: RunEvent) -> None:
        self.events.append(event)


def _row(index: int, mu: float, dmu_ds: float = 1.0, det: float = 1.0, sigma: float = 1.0) -> AtlasRow:
    return AtlasRow(
        index=index,
        arclength=0.1 * index,
        mu=mu,
        u=[1.0],
        tau=1.5,
        action=0.8,
        sigma_min=sigma,
        shooting_sigma_min=sigma,
        shooting_jac_det=det,
        dmu_ds=dmu_ds,
        residual_norm=1e-12,
        tangent=[0.0, 0.0, 1.0],
    )


@pytest.fixture(scope="module")
def shift():
    return builtin_system("harmonic", {"mu_coupling": 1.0})


@pytest.fixture(scope="module")
def shift_atlas(shift):
    seed = shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)
    opts = ContinuationOptions(ds=0.05, ds_max=0.2)
    emitter = _RecordingEmitter()
    atlas = continue_family(shift, seed, 1, opts, SHOOTING, emitter)
    detect_events(shift, atlas, opts, SHOOTING, emitter)
    return atlas, emitter


@pytest.fixture(scope="module")
def fold():
    return builtin_system("fold_quartic")


@pytest.fixture(scope="module")
def fold_atlas(fold):
    seed = shoot(fold, 0.3, ShootingGuess(u=[-0.02], tau=2.8), SHOOTING)
    opts = ContinuationOptions(ds=1e-3, ds_min=1e-7, ds_max=1e-2, max_steps=400, mu_window=(0.25, 0.55))
    atlas = continue_family(fold, seed, 1, opts, SHOOTING)
    return detect_events(fold, atlas, opts, SHOOTING)


# -------------------------------------------------------------------------
# Options
# -------------------------------------------------------------------------
class TestContinuationOptions:

    def test_defaults(self):
        opts = ContinuationOptions()
        assert (opts.ds, opts.ds_min, opts.ds_max) == (1e-3, 1e-6, 1e-2)
        assert opts.degeneracy_threshold == 1e-6

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"ds": 1e-7},
            {"ds": 0.5},
            {"mu_window": (1.0, 0.0)},
            {"shrink": 1.5},
            {"grow": 1.0},
        ],
    )
    def test_rejects_inconsistent_steps(self, kwargs):
        with pytest.raises(ValidationError):
            ContinuationOptions(**kwargs)

    def test_atlas_direction(self):
        with pytest.raises(ValidationError):
            FamilyAtlas(system_id="harmonic", direction=0)


# -------------------------------------------------------------------------
# Continuation of the shifted circle family
# -------------------------------------------------------------------------
class TestShiftFamily:

    def test_rows_follow_closed_form(self, shift_atlas):
        atlas, _ = shift_atlas
        assert len(atlas.rows) > 3
        for row in atlas.rows:
            assert row.u[0] == pytest.approx(math.sqrt(1.0 + 2.0 * row.mu), abs=1e-8)
            assert row.tau == pytest.approx(math.pi / 2, abs=1e-8)
            assert row.action == pytest.approx((1.0 + 2.0 * row.mu) * math.pi / 4, abs=1e-4)

    def test_mu_increases_to_range_end(self, shift_atlas):
        atlas, _ = shift_atlas
        mus = [row.mu for row in atlas.rows]
        assert all(b > a for a, b in zip(mus, mus[1:]))
        assert mus[0] == 0.0
        assert mus[-1] == 1.0
        assert "seed" in atlas.rows[0].flags
        assert "range_end" in atlas.rows[-1].flags

    def test_only_range_end_event(self, shift_atlas):
        atlas, _ = shift_atlas
        assert [e.kind for e in atlas.events] == [EventKind.RANGE_END]
        assert atlas.events_of(EventKind.FOLD) == []

    def test_rows_are_nondegenerate(self, shift_atlas):
        atlas, _ = shift_atlas
        assert all(row.dmu_ds > 0 for row in atlas.rows)
        assert all(row.sigma_min > 1e-3 for row in atlas.rows)
        assert all("degenerate" not in row.flags for row in atlas.rows)

    def test_emits_steps_and_events(self, shift_atlas):
        atlas, emitter = shift_atlas
        steps = [e for e in emitter.events if e.event_type == EventType.CONTINUATION_STEP]
        accepted = [e for e in steps if e.details["result"] == "accepted"]
        assert len(accepted) == len(atlas.rows) - 1
        family = [e for e in emitter.events if e.event_type == EventType.FAMILY_EVENT]
        assert [e.details["kind"] for e in family] == ["range_end"]

    def test_rows_reshoot_without_iterations(self, shift, shift_atlas):
        atlas, _ = shift_atlas
        iterations = verify_rows(shift, atlas, SHOOTING, max_workers=2)
        assert len(iterations) == len(atlas.rows)
        assert all(it is not None and it <= 1 for it in iterations)

    def test_step_budget(self, shift):
        seed = shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)
        atlas = continue_family(shift, seed, 1, ContinuationOptions(ds=0.01, max_steps=2), SHOOTING)
        assert len(atlas.rows) == 3
        assert atlas.events == []

    def test_landing_on_lower_bound(self, shift):
        seed = shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)
        atlas = continue_family(shift, seed, -1, ContinuationOptions(ds=0.01), SHOOTING)
        assert len(atlas.rows) == 2
        assert atlas.rows[-1].mu == 0.0
        assert atlas.events[0].kind == EventKind.RANGE_END

    def test_mu_window(self, shift):
        seed = shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)
        opts = ContinuationOptions(ds=0.01, ds_max=0.05, mu_window=(0.0, 0.2))
        atlas = continue_family(shift, seed, 1, opts, SHOOTING)
        assert atlas.rows[-1].mu == pytest.approx(0.2)

    def test_degenerate_seed_is_rejected(self, shift):
        seed = shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)
        with pytest.raises(SeedDegenerateError) as exc_info:
            continue_family(shift, seed, 1, ContinuationOptions(degeneracy_threshold=2.0), SHOOTING)
        assert exc_info.value.mu == 0.0

    def test_bad_direction(self, shift):
        seed = shoot(shift, 0.0, ShootingGuess(u=[1.0], tau=1.5), SHOOTING)
        with pytest.raises(ValueError, match="direction"):
            continue_family(shift, seed, 0, shooting=SHOOTING)


# -------------------------------------------------------------------------
# Fold of the quartic family
# -------------------------------------------------------------------------
class TestFoldFamily:

    def test_fold_is_located(self, fold, fold_atlas):
        folds = fold_atlas.events_of(EventKind.FOLD)
        assert len(folds) == 1
        assert folds[0].mu_estimate == pytest.approx(fold_mu_bisection(fold), abs=1e-8)
        assert abs(folds[0].refined_u[0]) < 1e-3

    def test_determinant_change_coincides_with_fold(self, fold_atlas):
        degeneracies = fold_atlas.events_of(EventKind.DEGENERACY)
        assert degeneracies
        assert any(e.coincides_with_fold for e in degeneracies)
        assert fold_atlas.events_of(EventKind.FOLD)[0].coincides_with_fold

    def test_family_turns_back(self, fold_atlas):
        mus = [row.mu for row in fold_atlas.rows]
        assert max(mus) < 0.5 + 1e-9
        assert mus[-1] < max(mus)
        signs = {np.sign(row.u[0]) for row in fold_atlas.rows}
        assert signs == {-1.0, 1.0}

    def test_probe_approaches_the_fold(self, fold, fold_atlas):
        event = fold_atlas.events_of(EventKind.FOLD)[0]
        probe = omega_probe(fold, fold_atlas, event, refinement_depth=6, delta=1e-3, ratio=4.0, shooting=SHOOTING)
        assert probe.warning is None
        assert probe.deepest_level == 6
        assert probe.side == -1
        assert all(mu < event.mu_estimate for mu in probe.sample_mus)
        assert abs(probe.limit_u[0]) < 1e-3
        assert probe.action_spread < 1e-2
        assert 0.3 < probe.convergence_order < 0.7

    def test_shipped_refinement_reaches_a_degenerate_limit(self, fold, fold_atlas):
        # configs/fold.toml: depth 8, delta 1e-4, ratio 4
        event = fold_atlas.events_of(EventKind.FOLD)[0]
        limit = omega_probe(fold, fold_atlas, event, refinement_depth=8, delta=1e-4, ratio=4.0, shooting=SHOOTING)
        assert limit.warning is None
        assert limit.deepest_level == 8
        assert limit.action_spread < 1e-6 * (1.0 + abs(limit.limit_action))
        assert len(limit.contractions) == 7
        assert all(c >= 1.5 for c in limit.contractions)
        assert limit.limit_degenerate

    def test_refined_fold_is_polished(self, fold, fold_atlas):
        event = fold_atlas.events_of(EventKind.FOLD)[0]
        assert event.mu_estimate == pytest.approx(fold_mu_bisection(fold), abs=1e-10)
        assert abs(event.refined_u[0]) < 1e-5

    def test_census_below_and_above(self, fold, fold_atlas):
        event = fold_atlas.events_of(EventKind.FOLD)[0]
        result = limit_census(fold, event, delta=1e-3, neighborhood_radius=1e-2, grid=6, shooting=SHOOTING)
        assert (result.count_below, result.count_above) == (2, 0)
        assert result.warning is None
        momenta = sorted(u[0] for u, _ in result.chords_below)
        expected = math.sqrt(2e-3 * 1e-3)
        assert momenta == pytest.approx([-expected, expected], abs=1e-6)


# -------------------------------------------------------------------------
# Restricted three-body families
# -------------------------------------------------------------------------
@pytest.fixture(scope="module")
def rtbp_families():
    cfg = load_config(CONFIG_DIR / "rtbp_families.toml")
    system = cfg.system.build()
    shooting = cfg.solver.shooting_options()
    opts = cfg.continuation.options(shooting.degeneracy_threshold)
    atlases = []
    for seed in cfg.continuation.seeds:
        chord = shoot(system, seed.mu, seed.guess, shooting)
        atlas = continue_family(system, chord, seed.direction, opts, shooting)
        atlases.append(detect_events(system, atlas, opts, shooting))
    return cfg, system, shooting, atlases


@pytest.mark.slow
class TestRtbpFamilies:

    def test_lower_family_is_nondegenerate(self, rtbp_families):
        _, _, shooting, (lower, _) = rtbp_families
        assert len(lower.rows) > 10
        assert lower.events_of(EventKind.FOLD) == []
        assert lower.events_of(EventKind.DEGENERACY) == []
        assert all(row.sigma_min > shooting.degeneracy_threshold for row in lower.rows)
        assert all(row.u[1] < 0 for row in lower.rows)

    def test_upper_family_folds_near_the_resonance(self, rtbp_families):
        _, _, _, (_, upper) = rtbp_families
        folds = upper.events_of(EventKind.FOLD)
        assert folds
        assert 3.1 < folds[0].mu_estimate < 3.3
        mus = [row.mu for row in upper.rows]
        # past the fold the family revisits energies below it
        assert mus[-1] < max(mus)

    def test_upper_family_fold_census(self, rtbp_families):
        cfg, system, shooting, (_, upper) = rtbp_families
        cont = cfg.continuation
        fold = upper.events_of(EventKind.FOLD)[0]
        result = limit_census(
            system,
            fold,
            delta=cont.census_delta,
            neighborhood_radius=cont.census_radius,
            grid=cont.census_grid,
            shooting=shooting,
        )
        assert result.count_below >= 1
        assert result.mu_infinity == fold.mu_estimate


# -------------------------------------------------------------------------
# Synthetic atlases
# -------------------------------------------------------------------------
class TestSyntheticEvents:

    def test_sigma_dip_without_sign_change(self, shift):
        atlas = FamilyAtlas(
            system_id="harmonic",
            rows=[_row(0, 0.1), _row(1, 0.2, sigma=1e-8), _row(2, 0.3, sigma=1e-9), _row(3, 0.4)],
        )
        detect_events(shift, atlas, ContinuationOptions(), SHOOTING)
        events = atlas.events_of(EventKind.DEGENERACY)
        assert len(events) == 1
        assert events[0].rows == [2]
        assert events[0].mu_estimate == 0.3

    def test_stop_events_are_kept(self, shift):
        atlas = FamilyAtlas(
            system_id="harmonic",
            rows=[_row(0, 0.1), _row(1, 0.2)],
            events=[FamilyEvent(kind=EventKind.STALL, mu_estimate=0.2, rows=[1])],
        )
        detect_events(shift, atlas, ContinuationOptions(), SHOOTING)
        assert [e.kind for e in atlas.events] == [EventKind.STALL]

    def test_contact_violation_attached_to_nearest_row(self):
        atlas = FamilyAtlas(system_id="harmonic", rows=[_row(0, 0.1), _row(1, 0.2), _row(2, 0.3)])
        reports = [
            ContactReport(
                mu=0.21, f_min=-1.0, f_max=1.0, kappa=math.inf, sample_count=10, violation_count=3, passed=False
            ),
            ContactReport(mu=0.3, f_min=0.5, f_max=1.0, kappa=2.0, sample_count=100, passed=True),
        ]
        contact_events(atlas, reports)
        assert len(atlas.events) == 1
        event = atlas.events[0]
        assert event.kind == EventKind.CONTACT_VIOLATION
        assert event.rows == [1]
        assert "3 violations" in event.detail


class TestLimitHelpers:

    def test_aitken_is_exact_for_geometric_sequences(self):
        sequence = [np.array([1.0 + 0.5**k, 2.0]) for k in range(5)]
        np.testing.assert_allclose(aitken_limit(sequence), [1.0, 2.0], atol=1e-12)

    def test_aitken_with_short_sequence(self):
        np.testing.assert_array_equal(aitken_limit([np.array([1.0]), np.array([3.0])]), [3.0])

    def test_census_grid_avoids_center(self):
        guesses = census_guesses([0.0], 2.0, 0.01, 2)
        assert len(guesses) == 4
        assert all(g.u[0] != 0.0 and g.tau != 2.0 for g in guesses)

    @pytest.mark.parametrize("grid", [1, 3, 0])
    def test_census_grid_must_be_even(self, grid):
        with pytest.raises(ValueError, match="even"):
            census_guesses([0.0], 1.0, 0.1, grid)

    def test_census_needs_a_limit(self, shift):
        event = FamilyEvent(kind=EventKind.FOLD, mu_estimate=0.5, rows=[0])
        with pytest.raises(ValueError, match="limit"):
            limit_census(shift, event)

    @pytest.mark.parametrize(
        "kwargs,match",
        [
            ({"refinement_depth": -1}, "refinement_depth"),
            ({"delta": 0.0}, "delta"),
            ({"ratio": 1.0}, "ratio"),
        ],
    )
    def test_probe_rejects_bad_arguments(self, shift, kwargs, match):
        atlas = FamilyAtlas(system_id="harmonic", rows=[_row(0, 0.1)])
        event = FamilyEvent(kind=EventKind.FOLD, mu_estimate=0.5, rows=[0])
        with pytest.raises(ValueError, match=match):
            omega_probe(shift, atlas, event, **kwargs)

    def test_probe_needs_bracketing_rows(self, shift):
        atlas = FamilyAtlas(system_id="harmonic", rows=[_row(0, 0.1)])
        event = FamilyEvent(kind=EventKind.FOLD, mu_estimate=0.5)
        with pytest.raises(ValueError, match="bracketing"):
            omega_probe(shift, atlas, event)
