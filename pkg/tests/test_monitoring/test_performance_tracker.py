import json
import logging
import time
from unittest.mock import patch

import pytest

from monitoring.performance_tracker import PerformanceData, PerformanceTracker


@pytest.fixture
def performance_tracker_instance():
    return PerformanceTracker()


def test_start_and_end_trace(performance_tracker_instance):
    trace_id = performance_tracker_instance.start_trace("encode_frame", "encode", {"frame": 1})
    time.sleep(0.01)
    trace = performance_tracker_instance.end_trace(trace_id, success=True)

    assert isinstance(trace, PerformanceData)
    assert trace.name == "encode_frame"
    assert trace.category == "encode"
    assert trace.duration_ms > 0
    assert trace.metadata == {"frame": 1, "success": True}
    assert performance_tracker_instance.get_performance_metrics()["encode"]["count"] == 1


def test_unknown_trace(performance_tracker_instance):
    assert performance_tracker_instance.end_trace("missing_1") is None


def test_trace_ids_are_unique(performance_tracker_instance):
    ids = {performance_tracker_instance.start_trace("step", "step") for _ in range(5)}
    assert len(ids) == 5


def test_statistics(performance_tracker_instance):
    for value in range(1, 101):
        performance_tracker_instance.record("frame", float(value))
    stats = performance_tracker_instance.get_performance_metrics()["frame"]
    assert stats["count"] == 100
    assert stats["mean"] == pytest.approx(50.5)
    assert stats["min"] == 1.0
    assert stats["max"] == 100.0
    assert stats["p99"] == pytest.approx(99.01)


def test_history_is_bounded():
    tracker = PerformanceTracker(max_history=3)
    for value in (1.0, 2.0, 3.0, 4.0):
        tracker.record("step", value)
    assert list(tracker.durations["step"]) == [2.0, 3.0, 4.0]
    assert tracker.durations["step"].maxlen == 3
    assert tracker.get_performance_metrics()["step"]["count"] == 3


def test_threshold_exceeded_is_logged(performance_tracker_instance):
    with patch.object(logging.getLogger('monitoring.performance_tracker'), 'warning') as mock_warning:
        performance_tracker_instance.set_threshold("frame", 20.0)
        performance_tracker_instance.record("frame", 10.0)
        performance_tracker_instance.record("frame", 25.0)

        mock_warning.assert_called_once()
        assert "Performance threshold exceeded" in mock_warning.call_args[0][0]
    assert performance_tracker_instance.get_performance_metrics()["frame"]["threshold_exceeded_count"] == 1


def test_reset(performance_tracker_instance):
    performance_tracker_instance.record("frame", 1.0)
    performance_tracker_instance.start_trace("x", "frame")
    performance_tracker_instance.reset()
    assert performance_tracker_instance.get_performance_metrics() == {}
    assert performance_tracker_instance.traces == {}


def test_export_jsonl(performance_tracker_instance, tmp_path):
    performance_tracker_instance.record("encode", 2.0)
    performance_tracker_instance.record("step", 1.0)
    path = tmp_path / "bench.jsonl"
    performance_tracker_instance.export_jsonl(str(path), extra=[{"summary": True, "fps": 120.0}])

    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert [line.get("stage") for line in lines] == ["encode", "step", None]
    assert lines[0]["mean"] == 2.0
    assert lines[-1] == {"summary": True, "fps": 120.0}
