"""Run events and solver metrics.

Event Emitters:
- EventEmitter, LoggingEventEmitter, CompositeEventEmitter,
  MetricsEventEmitter, NullEventEmitter

Metrics:
- SolverMetrics: Container for the Prometheus counters
- get_metrics: Process-wide instance

Factory:
- create_event_emitter, EventSinkType
"""

from src.chordatlas.events.emitter import (
    CompositeEventEmitter,
    EventEmitter,
    EventSinkType,
    LoggingEventEmitter,
    NullEventEmitter,
    create_event_emitter,
)
from src.chordatlas.events.metrics import MetricsEventEmitter, SolverMetrics, get_metrics
from src.chordatlas.events.models import EventType, RunEvent

__all__ = [
    # Event models
    "EventType",
    "RunEvent",
    # Event emitters
    "EventEmitter",
    "LoggingEventEmitter",
    "CompositeEventEmitter",
    "MetricsEventEmitter",
    "NullEventEmitter",
    # Metrics
    "SolverMetrics",
    "get_metrics",
    # Factory
    "EventSinkType",
    "create_event_emitter",
]
