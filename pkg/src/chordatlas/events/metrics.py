"""Prometheus counters for solver observability.

Metrics:
- chordatlas_shooting_total{result}: Shooting attempts by outcome
- chordatlas_newton_iterations_total{operation}: Newton steps by caller
- chordatlas_integrations_total{kind}: Flow integrations by kind
- chordatlas_continuation_steps_total{result}: Continuation steps by outcome
- chordatlas_family_events_total{kind}: Located family events by kind
- chordatlas_monitor_checks_total{monitor,result}: Monitor evaluations

The CLI writes the registry to <out>/metrics.prom after each command.

Source:
- src/chordatlas/events/models.py (RunEvent, EventType)
"""

import logging
import threading
from pathlib import Path
from typing import Optional, Union

from prometheus_client import REGISTRY, CollectorRegistry, Counter, write_to_textfile

from src.chordatlas.events.emitter import EventEmitter
from src.chordatlas.events.models import EventType, RunEvent

logger = logging.getLogger(__name__)


class SolverMetrics:
    """Container for the solver counters.

    Pass a fresh CollectorRegistry in tests to keep counts isolated.

    Example:
        >>> metrics = SolverMetrics(CollectorRegistry())
        >>> metrics.shooting_total.labels(result="converged").inc()
    """

    def __init__(self, registry: Optional[CollectorRegistry] = None):
        self.registry = registry or REGISTRY

        self.shooting_total = Counter(
            "chordatlas_shooting_total",
            "Shooting attempts by outcome",
            labelnames=["result"],
            registry=self.registry,
        )
        self.newton_iterations_total = Counter(
            "chordatlas_newton_iterations_total",
            "Newton iterations spent, by operation",
            labelnames=["operation"],
            registry=self.registry,
        )
        self.integrations_total = Counter(
            "chordatlas_integrations_total",
            "Flow integrations, by kind",
            labelnames=["kind"],
            registry=self.registry,
        )
        self.continuation_steps_total = Counter(
            "chordatlas_continuation_steps_total",
            "Continuation steps, by outcome",
            labelnames=["result"],
            registry=self.registry,
        )
        self.family_events_total = Counter(
            "chordatlas_family_events_total",
            "Located family events, by kind",
            labelnames=["kind"],
            registry=self.registry,
        )
        self.monitor_checks_total = Counter(
            "chordatlas_monitor_checks_total",
            "Monitor evaluations, by monitor and result",
            labelnames=["monitor", "result"],
            registry=self.registry,
        )

    def record_monitor(self, monitor: str, passed: bool) -> None:
        self.monitor_checks_total.labels(monitor=monitor, result="pass" if passed else "fail").inc()

    def write(self, path: Union[str, Path]) -> None:
        """Write the registry in Prometheus text format."""
        write_to_textfile(str(path), self.registry)


_default_metrics: Optional[SolverMetrics] = None
_default_lock = threading.Lock()


def get_metrics(registry: Optional[CollectorRegistry] = None) -> SolverMetrics:
    """Return the process-wide metrics, or a new instance for a custom registry."""
    global _default_metrics

    if registry is not None:
        return SolverMetrics(registry=registry)
    with _default_lock:
        if _default_metrics is None:
            _default_metrics = SolverMetrics()
    return _default_metrics


class MetricsEventEmitter(EventEmitter):
    """Counts run events in Prometheus.

    FAMILY_EVENT increments family_events_total by details["kind"];
    MONITOR_FAILURE records a failed check for details["monitor"];
    CONTINUATION_STEP counts details["result"]. Other event types are
    already counted at their source.
    """

    def __init__(
        self,
        metrics: Optional[SolverMetrics] = None,
        registry: Optional[CollectorRegistry] = None,
    ):
        self._metrics = metrics if metrics is not None else get_metrics(registry)

    @property
    def metrics(self) -> SolverMetrics:
        return self._metrics

    def emit(self, event: RunEvent) -> None:
        try:
            if event.event_type == EventType.FAMILY_EVENT:
                kind = event.details.get("kind", "unknown")
                self._metrics.family_events_total.labels(kind=kind).inc()
            elif event.event_type == EventType.MONITOR_FAILURE:
                self._metrics.record_monitor(event.details.get("monitor", "unknown"), passed=False)
            elif event.event_type == EventType.CONTINUATION_STEP:
                result = event.details.get("result", "accepted")
                self._metrics.continuation_steps_total.labels(result=result).inc()
        except Exception as e:
            logger.error(
                "Failed to update metrics for event %s: %s",
                event.event_type.value,
                str(e),
                extra={"event_type": event.event_type.value, "system_id": event.system_id},
            )
