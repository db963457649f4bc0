"""Run event models.

- EventType: Categories of events emitted during a run
- RunEvent: Structured event with system, timestamp and details

Events mark converged chords, continuation steps, located family events,
failed monitors and solver aborts. They feed structured logs and the
Prometheus counters in metrics.py.
"""

from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict

from pydantic import BaseModel, Field, field_serializer


class EventType(str, Enum):
    """Types of events emitted by a run.

    Attributes:
        CHORD_CONVERGED: Shooting produced a chord.
        CONTINUATION_STEP: A continuation step was accepted or rejected.
        FAMILY_EVENT: A fold, degeneracy, stall or stop was located.
        MONITOR_FAILURE: An estimate monitor (bounds, envelope, energy) failed.
        SOLVER_FAILURE: A solver aborted with an error.
    """

    CHORD_CONVERGED = "chord_converged"
    CONTINUATION_STEP = "continuation_step"
    FAMILY_EVENT = "family_event"
    MONITOR_FAILURE = "monitor_failure"
    SOLVER_FAILURE = "solver_failure"


class RunEvent(BaseModel):
    """Structured event emitted during a run.

    Details conventions:
        CHORD_CONVERGED: mu, tau, residual, iterations
        CONTINUATION_STEP: result ("accepted" | "rejected"), mu, ds
        FAMILY_EVENT: kind, mu_estimate
        MONITOR_FAILURE: monitor, mu
        SOLVER_FAILURE: error_type, error_message, command
    """

    event_type: EventType = Field(..., description="The category of event")
    system_id: str = Field(..., min_length=1, description="System the run works on")
    timestamp: datetime = Field(
        default_factory=lambda: datetime.now(timezone.utc),
        description="When the event occurred (UTC)",
    )
    details: Dict[str, Any] = Field(default_factory=dict)

    @field_serializer("timestamp")
    def serialize_timestamp(self, value: datetime) -> str:
        return value.isoformat()

    def to_log_dict(self) -> Dict[str, Any]:
        """Flatten the event for structured logging."""
        return {
            "event_type": self.event_type.value,
            "system_id": self.system_id,
            "timestamp": self.timestamp.isoformat(),
            **self.details,
        }
