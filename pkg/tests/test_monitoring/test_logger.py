import json
import logging
import os

import pytest

from monitoring.logger import JSONFormatter, LogManager, StructuredLoggerAdapter


@pytest.fixture
def log_manager_instance(tmp_path):
    manager = LogManager()
    manager.configure(log_dir=str(tmp_path), level="DEBUG")
    yield manager
    manager.clear_context()
    manager.configure(level="WARNING")


def _read_json_lines(path):
    for handler in logging.getLogger().handlers:
        handler.flush()
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def test_nothing_written_before_configure(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    LogManager()
    assert os.listdir(tmp_path) == []


def test_get_logger_with_context(log_manager_instance):
    logger = log_manager_instance.get_logger("test.logger", sequence_id="seq001")
    assert isinstance(logger, StructuredLoggerAdapter)
    assert logger.extra["sequence_id"] == "seq001"
    assert logger.extra["app"] == "pulsetrace"


def test_set_and_clear_context(log_manager_instance):
    log_manager_instance.set_context(run_id="abc123", profile="test")
    logger = log_manager_instance.get_logger("context.logger")
    assert logger.extra["run_id"] == "abc123"

    log_manager_instance.clear_context()
    logger = log_manager_instance.get_logger("context.logger")
    assert "run_id" not in logger.extra


def test_log_epoch_is_structured(log_manager_instance, tmp_path):
    log_manager_instance.set_context(run_id="r1")
    log_manager_instance.log_epoch(3, train_loss=0.5, val_mse=0.25, duration_s=1.5, steps=15)
    records = [r for r in _read_json_lines(tmp_path / "pulsetrace.log") if r["logger"] == "training.epoch"]
    assert records[-1]["epoch"] == 3
    assert records[-1]["run_id"] == "r1"
    assert records[-1]["metrics"] == {"train_loss": 0.5, "val_mse": 0.25, "duration_s": 1.5, "steps": 15}


def test_log_epoch_without_validation(log_manager_instance, tmp_path):
    log_manager_instance.log_epoch(1, train_loss=2.0, val_mse=None, duration_s=0.1)
    records = _read_json_lines(tmp_path / "pulsetrace.log")
    assert "val MSE n/a" in records[-1]["message"]


def test_log_stage_timing(log_manager_instance, tmp_path):
    log_manager_instance.log_stage_timing("encode", {"count": 10, "mean": 1.25, "p99": 2.0})
    record = _read_json_lines(tmp_path / "pulsetrace.log")[-1]
    assert record["stage"] == "encode"
    assert record["metrics"]["count"] == 10


def test_errors_go_to_error_log(log_manager_instance, tmp_path):
    logger = log_manager_instance.get_logger("failing")
    try:
        raise RuntimeError("boom")
    except RuntimeError:
        logger.exception("step failed")
    record = _read_json_lines(tmp_path / "errors.log")[-1]
    assert record["level"] == "ERROR"
    assert record["exception"]["type"] == "RuntimeError"


def test_formatter_defaults():
    formatter = JSONFormatter(environment="test")
    record = logging.LogRecord("x", logging.INFO, __file__, 1, "hello %s", ("world",), None)
    data = json.loads(formatter.format(record))
    assert data["message"] == "hello world"
    assert data["environment"] == "test"
