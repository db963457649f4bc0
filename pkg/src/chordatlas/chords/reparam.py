"""Period reparametrization of chords.

A chord v solves dv/dt = tau X_H(v) on [0, 1]; v_tau(t) = v(t / tau) solves
dv/dt = X_H(v) on [0, tau].
"""

from dataclasses import dataclass

import numpy as np

from src.chordatlas.chords.models import Chord


@dataclass(frozen=True, eq=False)
class PeriodTrajectory:
    """Chord samples on physical time t in [0, tau]."""

    times: np.ndarray
    states: np.ndarray
    tau: float

    @property
    def duration(self) -> float:
        return float(self.times[-1])


def reparametrize_to_period(chord: Chord) -> PeriodTrajectory:
    """Rescale the unit sample grid k/N to tau k/N."""
    unit = np.arange(chord.nodes + 1) / chord.nodes
    return PeriodTrajectory(times=chord.tau * unit, states=chord.samples.copy(), tau=chord.tau)


def to_unit_interval(trajectory: PeriodTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of reparametrize_to_period: (times / tau, states)."""
    return trajectory.times / trajectory.tau, trajectory.states.copy()
