"""Event emitters for run observability.

- EventEmitter: Abstract interface
- LoggingEventEmitter: Structured log entries, level by event type
- CompositeEventEmitter: Fans out to several sinks, isolating failures
- NullEventEmitter: Discards events
- create_event_emitter: Factory from a list of sink types

Emitters are synchronous; solvers call them between numerical steps.

Source:
- src/chordatlas/events/models.py (RunEvent, EventType)
"""

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import List, Optional

from src.chordatlas.events.models import EventType, RunEvent

logger = logging.getLogger(__name__)


class EventSinkType(str, Enum):
    """Supported event sinks.

    Attributes:
        LOGGING: Structured log entries.
        METRICS: Prometheus counters.
    """

    LOGGING = "logging"
    METRICS = "metrics"


class EventEmitter(ABC):
    """Abstract base class for run event emitters."""

    @abstractmethod
    def emit(self, event: RunEvent) -> None:
        """Publish an event. Implementations must not raise into solvers."""

    def close(self) -> None:
        """Release resources; the default does nothing."""


class LoggingEventEmitter(EventEmitter):
    """Writes events as structured log entries.

    Monitor failures log at WARNING, solver failures at ERROR and
    continuation steps at DEBUG; the rest log at INFO.
    """

    def __init__(self, logger_name: Optional[str] = None):
        self._logger = logging.getLogger(logger_name) if logger_name else logger
        self._log_level_map = {
            EventType.CHORD_CONVERGED: logging.INFO,
            EventType.CONTINUATION_STEP: logging.DEBUG,
            EventType.FAMILY_EVENT: logging.INFO,
            EventType.MONITOR_FAILURE: logging.WARNING,
            EventType.SOLVER_FAILURE: logging.ERROR,
        }

    def emit(self, event: RunEvent) -> None:
        level = self._log_level_map.get(event.event_type, logging.INFO)
        self._logger.log(
            level,
            "Run event: %s for %s",
            event.event_type.value,
            event.system_id,
            extra=event.to_log_dict(),
        )


class CompositeEventEmitter(EventEmitter):
    """Delegates to child emitters; a failing child never blocks the others."""

    def __init__(self, emitters: Optional[List[EventEmitter]] = None):
        self._emitters: List[EventEmitter] = emitters or []

    def add_emitter(self, emitter: EventEmitter) -> None:
        self._emitters.append(emitter)

    @property
    def emitters(self) -> List[EventEmitter]:
        return list(self._emitters)

    def emit(self, event: RunEvent) -> None:
        for emitter in self._emitters:
            try:
                emitter.emit(event)
            except Exception as e:
                logger.error(
                    "Failed to emit event to %s: %s",
                    type(emitter).__name__,
                    str(e),
                    extra={
                        "emitter_type": type(emitter).__name__,
                        "event_type": event.event_type.value,
                        "system_id": event.system_id,
                    },
                )

    def close(self) -> None:
        for emitter in self._emitters:
            try:
                emitter.close()
            except Exception as e:
                logger.error("Failed to close emitter %s: %s", type(emitter).__name__, str(e))


class NullEventEmitter(EventEmitter):
    """Discards all events."""

    def emit(self, event: RunEvent) -> None:
        pass


def create_event_emitter(
    sink_types: Optional[List[EventSinkType]] = None,
    logger_name: Optional[str] = None,
) -> EventEmitter:
    """Build an emitter for the requested sinks.

    No sinks gives a LoggingEventEmitter; several sinks give a
    CompositeEventEmitter.
    """
    if not sink_types:
        return LoggingEventEmitter(logger_name=logger_name)

    emitters: List[EventEmitter] = []
    for sink_type in sink_types:
        if sink_type == EventSinkType.LOGGING:
            emitters.append(LoggingEventEmitter(logger_name=logger_name))
        elif sink_type == EventSinkType.METRICS:
            # Deferred import: metrics.py imports this module.
            from src.chordatlas.events.metrics import MetricsEventEmitter

            emitters.append(MetricsEventEmitter())
        else:
            logger.warning("Unknown event sink type: %s, skipping", sink_type)

    if not emitters:
        return LoggingEventEmitter(logger_name=logger_name)
    if len(emitters) == 1:
        return emitters[0]
    return CompositeEventEmitter(emitters)
