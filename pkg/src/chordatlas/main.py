"""Command-line entry point for chordatlas.

Subcommands:
- contact-check: Sample the contact function over a mu grid
- find-chord: Shoot chords from guesses or from a coarse scan
- continue: Continue chord families, locate events and probe them
- gradient-flow: beta_R stretching flows from a seed chord

Exit codes:
- 0: Success
- 1: A monitor or check failed, or a flow parked
- 2: Usage or configuration error
- 3: Solver failure
- 4: A flow escaped its rho-ball
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from pydantic import TypeAdapter, ValidationError

from src.chordatlas.chords import (
    Chord,
    DimensionError,
    NoConvergenceError,
    ShootingError,
    ShootingGuess,
    multi_start_shoot,
    nondegeneracy,
    scan_guesses,
    shoot,
)
from src.chordatlas.config import ConfigError, RunConfig, SeedSection, load_config
from src.chordatlas.continuation import (
    EventKind,
    FamilyAtlas,
    SeedDegenerateError,
    contact_events,
    continue_family,
    detect_events,
    omega_probe,
    limit_census,
    verify_rows,
)
from src.chordatlas.events import (
    EventEmitter,
    EventSinkType,
    EventType,
    RunEvent,
    create_event_emitter,
    get_metrics,
)
from src.chordatlas.flow import IntegrationError
from src.chordatlas.gradient import FlowError, energy_bound, stretching_experiment
from src.chordatlas.phase import (
    ParameterRangeError,
    SystemDescriptor,
    SystemParamsError,
    contact_check,
)
from src.chordatlas.rabinowitz import ContactFailedError, action, family_action_envelope
from src.chordatlas.store import (
    ChordRecord,
    flow_snapshots_csv,
    write_atlas_csv,
    write_atlases,
    write_gnuplot_script,
    write_jsonl,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_ESCAPED = 4

USAGE_ERRORS = (ConfigError, ValidationError, ParameterRangeError, SystemParamsError)
SOLVER_ERRORS = (
    IntegrationError,
    ShootingError,
    DimensionError,
    FlowError,
    SeedDegenerateError,
    ContactFailedError,
)

CommandHandler = Callable[[RunConfig, Path, Optional[List[SeedSection]], EventEmitter], int]


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


def _log_configuration(cfg: RunConfig, command: str, out_dir: Path) -> None:
    """Log the settings a run depends on."""
    logger.info("chordatlas configuration:")
    logger.info(f"  Command: {command}")
    logger.info(f"  System: {cfg.system.name} {cfg.system.params or ''}")
    logger.info(f"  Lambda: {cfg.system.lambda_choice.value if cfg.system.lambda_choice else 'default'}")
    logger.info(f"  Newton tolerance: {cfg.solver.newton_tol}")
    logger.info(f"  Integrator rtol/atol: {cfg.solver.rtol}/{cfg.solver.atol}")
    logger.info(f"  Samples: {cfg.solver.samples}")
    logger.info(f"  Output directory: {out_dir}")


def read_seed_file(path: Path) -> List[SeedSection]:
    """Parse a JSON list of {mu, u, tau, direction?} objects.

    Raises:
        ConfigError: The file is missing, not JSON or not a list of seeds.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(path, f"cannot read seed file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"seed file is not JSON: {exc}") from exc
    try:
        seeds = TypeAdapter(List[SeedSection]).validate_python(raw)
    except ValidationError as exc:
        raise ConfigError(path, str(exc)) from exc
    if not seeds:
        raise ConfigError(path, "seed file holds no seeds")
    return seeds


def _monitor_failure(emitter: EventEmitter, system_id: str, monitor: str, **details) -> None:
    emitter.emit(
        RunEvent(
            event_type=EventType.MONITOR_FAILURE,
            system_id=system_id,
            details={"monitor": monitor, **details},
        )
    )


# -------------------------------------------------------------------------
# contact-check
# -------------------------------------------------------------------------
def cmd_contact_check(
    cfg: RunConfig, out_dir: Path, seeds: Optional[List[SeedSection]], emitter: EventEmitter
) -> int:
    """Check the contact condition at every mu of contact.mu_grid."""
    if not cfg.contact.mu_grid:
        raise ConfigError(None, "contact.mu_grid is empty")
    system = cfg.system.build()
    sampler = cfg.contact.sampler()
    metrics = get_metrics()
    reports = []
    for mu in cfg.contact.mu_grid:
        report = contact_check(system, mu, sampler)
        metrics.record_monitor("contact", report.passed)
        if not report.passed:
            _monitor_failure(
                emitter, system.system_id, "contact", mu=mu, violation_count=report.violation_count
            )
        reports.append(report)
    write_jsonl(reports, cfg.output.path(out_dir, "contact.jsonl"))
    passed = all(r.passed for r in reports)
    logger.info(
        "Contact check finished",
        extra={"system_id": system.system_id, "grid_size": len(reports), "passed": passed},
    )
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# -------------------------------------------------------------------------
# find-chord
# -------------------------------------------------------------------------
def _check_guess(system: SystemDescriptor, guess: ShootingGuess) -> None:
    if len(guess.u) != system.n:
        raise ConfigError(None, f"start coordinates {list(guess.u)} do not match n = {system.n}")


def _chord_starts(system: SystemDescriptor, cfg: RunConfig, seeds: Optional[List[SeedSection]]):
    shooting = cfg.solver.shooting_options()
    chord_cfg = cfg.chord
    if seeds:
        return [(s.mu, s.guess) for s in seeds]
    if chord_cfg.mode == "scan":
        if not chord_cfg.scan_u or len(chord_cfg.scan_tau) < 2:
            raise ConfigError(None, "scan mode needs chord.scan_u and at least two chord.scan_tau values")
        guesses = scan_guesses(
            system, chord_cfg.mu, chord_cfg.scan_u, chord_cfg.scan_tau, shooting, chord_cfg.max_guesses
        )
        if not guesses:
            raise NoConvergenceError(0, float("inf"), "the scan found no candidate chords")
        return [(chord_cfg.mu, g) for g in guesses]
    if not chord_cfg.guesses:
        raise ConfigError(None, "chord.guesses is empty")
    return [(chord_cfg.mu, g) for g in chord_cfg.guesses]


def cmd_find_chord(
    cfg: RunConfig, out_dir: Path, seeds: Optional[List[SeedSection]], emitter: EventEmitter
) -> int:
    """Shoot chords and write one record per distinct chord.

    A single start surfaces its solver error; several starts are shot
    concurrently per mu and fail only when none converges.
    """
    system = cfg.system.build()
    shooting = cfg.solver.shooting_options()
    starts = _chord_starts(system, cfg, seeds)
    for _, guess in starts:
        _check_guess(system, guess)

    chords: List[Chord] = []
    if len(starts) == 1:
        mu, guess = starts[0]
        chords.append(shoot(system, mu, guess, shooting))
    else:
        by_mu: Dict[float, List[ShootingGuess]] = {}
        for mu, guess in starts:
            by_mu.setdefault(mu, []).append(guess)
        for mu, guesses in by_mu.items():
            chords.extend(multi_start_shoot(system, mu, guesses, shooting, cfg.solver.max_workers))
        if not chords:
            raise NoConvergenceError(
                shooting.max_iter, float("inf"), f"none of {len(starts)} starts converged"
            )

    records = []
    for chord in chords:
        report = nondegeneracy(system, chord, cfg.solver.degeneracy_threshold, shooting)
        records.append(ChordRecord.from_chord(chord, action(system, chord), report))
        emitter.emit(
            RunEvent(
                event_type=EventType.CHORD_CONVERGED,
                system_id=system.system_id,
                details={
                    "mu": chord.mu,
                    "tau": chord.tau,
                    "residual": chord.residual_norm,
                    "iterations": chord.newton_iterations,
                },
            )
        )
    write_jsonl(records, cfg.output.path(out_dir, "chords.jsonl"))
    return EXIT_OK


# -------------------------------------------------------------------------
# continue
# -------------------------------------------------------------------------
def _check_envelope(
    system: SystemDescriptor, atlas: FamilyAtlas, cfg: RunConfig, emitter: EventEmitter
) -> bool:
    """Contact check at the ends of the family's mu span, then the action envelope."""
    mus = sorted({min(r.mu for r in atlas.rows), max(r.mu for r in atlas.rows)})
    sampler = cfg.contact.sampler()
    reports = [contact_check(system, mu, sampler) for mu in mus]
    contact_events(atlas, reports)
    if not all(r.passed for r in reports):
        _monitor_failure(emitter, system.system_id, "contact", mu=[r.mu for r in reports if not r.passed])
        return False
    envelope = family_action_envelope(atlas.rows, reports, cfg.continuation.kappa_margin)
    if not envelope.passed:
        _monitor_failure(emitter, system.system_id, "action_envelope", mu=envelope.mu_start)
    return envelope.passed


def _probe_events(system: SystemDescriptor, atlas: FamilyAtlas, cfg: RunConfig) -> None:
    cont = cfg.continuation
    shooting = cfg.solver.shooting_options()
    for event in atlas.events:
        if event.kind not in (EventKind.FOLD, EventKind.DEGENERACY):
            continue
        probe = omega_probe(
            system,
            atlas,
            event,
            cont.probe_depth,
            cont.probe_delta,
            cont.probe_ratio,
            shooting,
            cfg.solver.degeneracy_threshold,
        )
        atlas.probes.append(probe)
        limit = (probe.limit_u, probe.limit_tau) if probe.limit_u else None
        if limit is None and event.refined_u is None:
            logger.warning(
                "Census skipped, no limit chord",
                extra={"system_id": system.system_id, "mu_infinity": event.mu_estimate},
            )
            continue
        atlas.census.append(
            limit_census(
                system,
                event,
                cont.census_delta,
                cont.census_radius,
                cont.census_grid,
                shooting,
                distinct_cutoff=cont.distinct_cutoff,
                limit=limit,
                max_workers=cfg.solver.max_workers,
            )
        )


def cmd_continue(
    cfg: RunConfig, out_dir: Path, seeds: Optional[List[SeedSection]], emitter: EventEmitter
) -> int:
    """Continue every seed, locate and probe its events, then write the atlas bundle."""
    seeds = seeds or cfg.continuation.seeds
    if not seeds:
        raise ConfigError(None, "continuation.seeds is empty")
    system = cfg.system.build()
    shooting = cfg.solver.shooting_options()
    opts = cfg.continuation.options(cfg.solver.degeneracy_threshold)

    atlases: List[FamilyAtlas] = []
    checks_passed = True
    for seed in seeds:
        _check_guess(system, seed.guess)
        chord = shoot(system, seed.mu, seed.guess, shooting)
        atlas = continue_family(system, chord, seed.direction, opts, shooting, emitter)
        detect_events(system, atlas, opts, shooting, emitter)
        _probe_events(system, atlas, cfg)

        if cfg.continuation.verify:
            iterations = verify_rows(system, atlas, shooting, cfg.solver.max_workers)
            failed = [row.index for row, it in zip(atlas.rows, iterations) if it is None]
            get_metrics().record_monitor("row_reshoot", not failed)
            if failed:
                _monitor_failure(emitter, system.system_id, "row_reshoot", rows=failed)
                checks_passed = False
        if cfg.continuation.check_envelope:
            checks_passed = _check_envelope(system, atlas, cfg, emitter) and checks_passed
        atlases.append(atlas)

    atlas_path = write_atlases(atlases, cfg.output.path(out_dir, "atlas.jsonl"))
    csv_path = write_atlas_csv(atlases, cfg.output.path(out_dir, "atlas.csv"))
    write_gnuplot_script(atlases, csv_path, cfg.output.path(out_dir, "atlas.gp"))
    logger.info(
        "Continuation finished",
        extra={
            "system_id": system.system_id,
            "families": len(atlases),
            "rows": sum(len(a.rows) for a in atlases),
            "events": sum(len(a.events) for a in atlases),
            "path": str(atlas_path),
        },
    )
    return EXIT_OK if checks_passed else EXIT_CHECK_FAILED


# -------------------------------------------------------------------------
# gradient-flow
# -------------------------------------------------------------------------
def cmd_gradient_flow(
    cfg: RunConfig, out_dir: Path, seeds: Optional[List[SeedSection]], emitter: EventEmitter
) -> int:
    """Stretching flows for every gradient.r_values entry.

    Exit 4 if any run escaped, else 1 if any run parked or broke the
    energy bound, else 0.
    """
    grad = cfg.gradient
    if seeds:
        mu0, guess = seeds[0].mu, seeds[0].guess
    elif grad.seed is not None:
        mu0, guess = grad.mu0, grad.seed
    else:
        raise ConfigError(None, "gradient.seed is not set")
    system = cfg.system.build()
    shooting = cfg.solver.shooting_options()

    _check_guess(system, guess)
    seed_chord = shoot(system, mu0, guess, shooting)
    target = shoot(system, grad.mu1, grad.target, shooting) if grad.target is not None else None
    reports = stretching_experiment(
        system,
        seed_chord,
        grad.mu1,
        grad.r_values,
        grad.nodes,
        grad.flow_options(),
        grad.plateau_tol,
        target,
        grad.relax_seed,
        cfg.solver.max_workers,
    )

    flow_snapshots_csv(
        [r.trajectory for r in reports],
        cfg.output.path(out_dir, "flow.csv"),
        labels=[f"R={r.R!r}" for r in reports],
    )
    runs = []
    bounds_passed = True
    for report in reports:
        bound = energy_bound(system, report.trajectory, grad.energy_margin)
        get_metrics().record_monitor("energy_bound", bound.passed)
        if not bound.passed:
            _monitor_failure(emitter, system.system_id, "energy_bound", R=report.R, energy=bound.energy)
            bounds_passed = False
        runs.append(
            {
                "R": report.R,
                "outcome": report.outcome,
                "stop_reason": report.trajectory.stop_reason,
                "steps": report.trajectory.steps,
                "plateau_min_gradient": report.plateau_min_gradient,
                "energy": report.energy,
                "distance_to_target": report.distance_to_target,
                "energy_bound": bound.model_dump(),
            }
        )
    summary = {
        "system_id": system.system_id,
        "mu0": mu0,
        "mu1": grad.mu1,
        "scheme": grad.scheme,
        "runs": runs,
    }
    summary_path = cfg.output.path(out_dir, "flow_summary.json")
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    outcomes = {r.outcome for r in reports}
    if "escaped" in outcomes:
        return EXIT_ESCAPED
    if "parked" in outcomes or not bounds_passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


COMMANDS: Dict[str, CommandHandler] = {
    "contact-check": cmd_contact_check,
    "find-chord": cmd_find_chord,
    "continue": cmd_continue,
    "gradient-flow": cmd_gradient_flow,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chordatlas",
        description="Reeb chords, their families and Floer-type gradient flows",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    parser.add_argument("--seed-file", type=Path, help="JSON list of {mu, u, tau, direction}")
    parser.add_argument("--out", type=Path, help="Output directory (default: [output].dir)")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    _configure_logging(args.verbose)

    out_dir: Optional[Path] = None
    system_id = "unknown"
    emitter = create_event_emitter([EventSinkType.LOGGING, EventSinkType.METRICS])
    try:
        cfg = load_config(args.config)
        system_id = cfg.system.name
        seeds = read_seed_file(args.seed_file) if args.seed_file else None
        out_dir = args.out or cfg.output.dir
        out_dir.mkdir(parents=True, exist_ok=True)
        _log_configuration(cfg, args.command, out_dir)
        return COMMANDS[args.command](cfg, out_dir, seeds, emitter)
    except USAGE_ERRORS as exc:
        logger.error("Usage error", extra={"error_message": str(exc)})
        return EXIT_USAGE
    except SOLVER_ERRORS as exc:
        emitter.emit(
            RunEvent(
                event_type=EventType.SOLVER_FAILURE,
                system_id=system_id,
                details={
                    "error_type": type(exc).__name__,
                    "error_message": str(exc),
                    "command": args.command,
                },
            )
        )
        return EXIT_SOLVER
    finally:
        emitter.close()
        if out_dir is not None:
            get_metrics().write(out_dir / "metrics.prom")


if __name__ == "__main__":
    sys.exit(main())
