import math

import pytest

from monitoring.metrics_collector import HISTORY_COLUMNS, SEQUENCE_COLUMNS, MetricsCollector


@pytest.fixture
def collector():
    return MetricsCollector()


def test_epoch_summary(collector):
    collector.start_epoch(1)
    collector.record_sequence("s0", loss=2.0, mse=1.5, cl=0.5)
    collector.record_sequence("s1", loss=4.0, mse=4.0, cl=None)
    row = collector.complete_epoch(val_mse=0.75)

    assert row["epoch"] == 1
    assert row["train_loss"] == 3.0
    assert row["train_mse"] == 2.75
    assert row["train_cl"] == 0.5
    assert row["cl_sequences"] == 1
    assert row["val_mse"] == 0.75
    assert row["steps"] == 2
    assert row["duration_s"] >= 0


def test_history_frames(collector):
    for epoch, loss in ((1, 3.0), (2, 1.0)):
        collector.start_epoch(epoch)
        collector.record_sequence("s0", loss=loss, mse=loss, cl=None)
        collector.complete_epoch()

    history = collector.history()
    assert list(history.columns) == HISTORY_COLUMNS
    assert list(history["train_loss"]) == [3.0, 1.0]
    assert history["val_mse"].isna().all()
    assert math.isnan(history["train_cl"].iloc[0])
    assert collector.loss_curve == [3.0, 1.0]

    sequences = collector.sequence_history()
    assert list(sequences.columns) == SEQUENCE_COLUMNS
    assert not sequences["cl_enabled"].any()


def test_record_outside_epoch(collector):
    with pytest.raises(RuntimeError):
        collector.record_sequence("s0", 1.0, 1.0, None)
    with pytest.raises(RuntimeError):
        collector.complete_epoch()


def test_current_metrics(collector):
    assert collector.get_current_metrics()["epochs"] == 0
    collector.start_epoch(1)
    collector.record_sequence("s0", loss=1.0, mse=1.0, cl=None)
    assert collector.get_current_metrics()["active_epoch"] == 1
    collector.complete_epoch(val_mse=0.5)
    metrics = collector.get_current_metrics()
    assert metrics == {"epochs": 1, "steps": 1, "last_train_loss": 1.0, "last_val_mse": 0.5, "active_epoch": None}


def test_restarting_an_epoch_discards_it(collector):
    collector.start_epoch(1)
    collector.record_sequence("s0", loss=9.0, mse=9.0, cl=None)
    collector.start_epoch(1)
    collector.record_sequence("s0", loss=1.0, mse=1.0, cl=None)
    assert collector.complete_epoch()["train_loss"] == 1.0
