"""Plot bundles and flat exports.

- write_atlas_csv: mu, start_coordinate, tau, action, sigma_min, family
- write_gnuplot_script: start coordinate against mu, one curve per family
- flow_snapshots_csv: s, sigma, action, gradient_norm, energy per snapshot
- write_jsonl: Pydantic records, one per line
- ChordRecord: Flat chord summary for chords.jsonl
"""

import csv
import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from pydantic import BaseModel

from src.chordatlas.chords.models import Chord, NondegReport
from src.chordatlas.continuation.models import EventKind, FamilyAtlas
from src.chordatlas.gradient.models import FlowTrajectory

logger = logging.getLogger(__name__)

ATLAS_COLUMNS = ["mu", "start_coordinate", "tau", "action", "sigma_min", "family"]
FLOW_COLUMNS = ["label", "s", "mu", "sigma", "action", "gradient_norm", "energy"]


class ChordRecord(BaseModel):
    """Flat summary of a converged chord for chords.jsonl."""

    system_id: str
    mu: float
    u: List[float]
    tau: float
    action: float
    residual_norm: float
    boundary_gap: float
    newton_iterations: int
    sigma_min: Optional[float] = None
    degenerate: Optional[bool] = None

    @classmethod
    def from_chord(
        cls, chord: Chord, action: float, report: Optional[NondegReport] = None
    ) -> "ChordRecord":
        return cls(
            system_id=chord.system_id,
            mu=chord.mu,
            u=[float(v) for v in chord.u],
            tau=chord.tau,
            action=action,
            residual_norm=chord.residual_norm,
            boundary_gap=chord.boundary_gap,
            newton_iterations=chord.newton_iterations,
            sigma_min=report.sigma_min if report is not None else None,
            degenerate=report.degenerate if report is not None else None,
        )


def _ensure_parent(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_atlas_csv(atlases: Sequence[FamilyAtlas], path: Union[str, Path]) -> Path:
    """One line per atlas row; start_coordinate is u[0]."""
    path = _ensure_parent(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(ATLAS_COLUMNS)
        for family, atlas in enumerate(atlases):
            for row in atlas.rows:
                values = [row.mu, row.u[0], row.tau, row.action, row.sigma_min]
                writer.writerow([repr(v) for v in values] + [family])
    return path


def write_gnuplot_script(
    atlases: Sequence[FamilyAtlas],
    csv_path: Union[str, Path],
    path: Union[str, Path],
    title: Optional[str] = None,
) -> Path:
    """Script plotting chord start coordinate (vertical) against mu.

    Families are separate curves; folds and degeneracies are marked with
    points at their mu estimate and refined start coordinate.
    """
    path = _ensure_parent(path)
    csv_name = Path(csv_path).name
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title or (atlases[0].system_id if atlases else 'chord families')}'",
        "set xlabel 'mu'",
        "set ylabel 'chord start coordinate'",
        "set grid",
    ]
    marks = [
        (e.mu_estimate, e.refined_u[0])
        for atlas in atlases
        for e in atlas.events
        if e.kind in (EventKind.FOLD, EventKind.DEGENERACY) and e.refined_u
    ]
    for i, (mu, u0) in enumerate(marks, start=1):
        lines.append(f"set label {i} '' at {mu!r},{u0!r} point pointtype 7 pointsize 1.5")
    plots = [
        f"'{csv_name}' using ($6 == {k} ? $1 : 1/0):2 with linespoints title 'family {k}'"
        for k in range(len(atlases))
    ]
    lines.append("plot " + ", \\\n     ".join(plots) if plots else "# no families")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def flow_snapshots_csv(
    trajectories: Sequence[FlowTrajectory],
    path: Union[str, Path],
    labels: Optional[Sequence[str]] = None,
) -> Path:
    """Snapshots of every trajectory, tagged with its label."""
    labels = list(labels) if labels is not None else [str(i) for i in range(len(trajectories))]
    if len(labels) != len(trajectories):
        raise ValueError("one label per trajectory is required")
    path = _ensure_parent(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(FLOW_COLUMNS)
        for label, traj in zip(labels, trajectories):
            for y in traj.snapshots:
                values = [y.s, y.mu, y.sigma, y.action, y.gradient_norm, y.energy_so_far]
                writer.writerow([label] + [repr(float(v)) for v in values])
    return path


def write_jsonl(records: Iterable[BaseModel], path: Union[str, Path]) -> Path:
    path = _ensure_parent(path)
    count = 0
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record.model_dump()) + "\n")
            count += 1
    logger.debug("Records written", extra={"path": str(path), "count": count})
    return path
