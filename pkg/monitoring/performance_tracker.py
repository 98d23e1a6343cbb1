# monitoring/performance_tracker.py
import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class PerformanceData:
    """One timed operation."""
    name: str
    category: str
    start_time: float
    end_time: Optional[float] = None
    duration_ms: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def complete(self) -> 'PerformanceData':
        self.end_time = time.perf_counter()
        self.duration_ms = (self.end_time - self.start_time) * 1000
        return self


class PerformanceTracker:
    """Latency bookkeeping per category (benchmark stages, evaluation, ...)."""

    def __init__(self, max_history: int = 100_000):
        self.traces: Dict[str, PerformanceData] = {}
        self.durations: Dict[str, Deque[float]] = {}
        self.thresholds: Dict[str, float] = {}
        self.max_history = max_history
        self.trace_lock = threading.RLock()
        self._counter = 0

    def start_trace(self, name: str, category: str, metadata: Optional[Dict[str, Any]] = None) -> str:
        """
        Start a performance trace.

        Args:
            name: Name of the operation being traced
            category: Category the duration is aggregated under
            metadata: Additional context data

        Returns:
            str: Trace ID for end_trace
        """
        with self.trace_lock:
            self._counter += 1
            trace_id = f"{name}_{self._counter}"
            self.traces[trace_id] = PerformanceData(name=name, category=category,
                                                    start_time=time.perf_counter(), metadata=metadata or {})
        return trace_id

    def end_trace(self, trace_id: str, success: bool = True) -> Optional[PerformanceData]:
        with self.trace_lock:
            if trace_id not in self.traces:
                return None
            trace = self.traces.pop(trace_id).complete()
            trace.metadata["success"] = success
        self.record(trace.category, trace.duration_ms, name=trace.name)
        return trace

    def record(self, category: str, duration_ms: float, name: Optional[str] = None) -> None:
        """Add an externally measured duration; the fast path for per-frame timings."""
        with self.trace_lock:
            history = self.durations.get(category)
            if history is None:
                history = self.durations[category] = deque(maxlen=self.max_history)
            history.append(duration_ms)
        threshold = self.thresholds.get(category)
        if threshold is not None and duration_ms > threshold:
            logger.warning(f"Performance threshold exceeded: {name or category} took {duration_ms:.2f}ms, "
                           f"threshold is {threshold}ms")

    def set_threshold(self, category: str, threshold_ms: float) -> None:
        self.thresholds[category] = threshold_ms
        logger.debug(f"Set performance threshold for {category}: {threshold_ms}ms")

    def reset(self) -> None:
        with self.trace_lock:
            self.traces.clear()
            self.durations.clear()

    def get_performance_metrics(self) -> Dict[str, Dict[str, Any]]:
        """
        Aggregate latency statistics.

        Returns:
            Dict[str, Dict[str, Any]]: count, mean, median, p95, p99, min, max (ms) per category
        """
        metrics = {}
        with self.trace_lock:
            snapshot = {category: list(values) for category, values in self.durations.items() if values}
        for category, values in snapshot.items():
            durations = np.asarray(values, dtype=np.float64)
            threshold = self.thresholds.get(category)
            metrics[category] = {
                "count": int(len(durations)),
                "mean": float(durations.mean()),
                "median": float(np.median(durations)),
                "p95": float(np.percentile(durations, 95)),
                "p99": float(np.percentile(durations, 99)),
                "min": float(durations.min()),
                "max": float(durations.max()),
                "threshold_exceeded_count": int(np.sum(durations > threshold)) if threshold is not None else 0,
            }
        return metrics

    def export_jsonl(self, path: str, extra: Optional[List[Dict[str, Any]]] = None) -> None:
        """Write one JSON object per category, followed by any extra records."""
        with open(path, "w", encoding="utf-8") as fh:
            for category, stats in self.get_performance_metrics().items():
                fh.write(json.dumps({"stage": category, **stats}) + "\n")
            for record in extra or []:
                fh.write(json.dumps(record) + "\n")
        logger.debug(f"Wrote performance data to {path}")
