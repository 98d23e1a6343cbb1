# tests/test_cli/test_runner.py
import threading

import numpy as np
import pandas as pd
import pytest

from exceptions import DataFormatError, EmptyInputError
from models import DiameterNetwork, build_profile
from phantoms import write_manifest, write_sequence
from runner import BenchReport, PulseTraceRunner, throughput
from training import TrainConfig, checkpoint_from_network, save_checkpoint
from tests.conftest import make_phantom


def test_throughput_arithmetic():
    assert throughput(1000, 4.0) == 250.0
    assert throughput(10, 0.0) == 0.0
    assert BenchReport(frames=1000, elapsed_s=4.0).real_time
    assert not BenchReport(frames=40, elapsed_s=1.0).real_time


def test_unknown_profile(tmp_path):
    with pytest.raises(ValueError):
        PulseTraceRunner(out_dir=str(tmp_path), profile="huge")


def test_synth_manifest(tmp_path):
    runner = PulseTraceRunner(out_dir=str(tmp_path), profile="test", seed=4)
    manifest = pd.read_csv(runner.synth(4))
    assert list(manifest["id"]) == ["seq000", "seq001", "seq002", "seq003"]
    assert manifest["K"].between(21, 126).all()
    assert manifest["T"].between(15, 30).all()
    assert (tmp_path / "seq002_truth.csv").exists()


def test_evaluate_seeded_checkpoint(tmp_path):
    """A network that always answers 4 mm is exact on constant 4 mm vessels."""
    data = tmp_path / "data"
    data.mkdir()
    rows = []
    for i in range(2):
        seq = make_phantom(length=10, d0_mm=4.0, amplitude_mm=0.0, seed=i)
        write_sequence(seq, str(data / f"c{i}.usq"))
        rows.append({"id": f"c{i}", "K": 10, "T": 20, "d0": 4.0, "a": 0.0, "file": f"c{i}.usq"})
    write_manifest(rows, str(data))

    network = DiameterNetwork(build_profile("test"), seed=0)
    for param in network.parameters().values():
        param.value[...] = 0
    network.head.biases[-1].value[...] = 4.0
    checkpoint = tmp_path / "oracle.ptck"
    save_checkpoint(checkpoint_from_network(network), str(checkpoint))

    runner = PulseTraceRunner(out_dir=str(tmp_path / "out"), profile="test")
    summary = runner.evaluate(str(checkpoint), str(data))
    assert summary["sequences"] == 2
    assert summary["mse_mean"] == 0.0
    assert summary["re_mean"] == 0.0
    report = pd.read_csv(tmp_path / "out" / "eval_report.csv")
    np.testing.assert_array_equal(report["mse_mm2"], [0.0, 0.0])


def test_train_needs_data(tmp_path):
    runner = PulseTraceRunner(out_dir=str(tmp_path / "run"), profile="test")
    runner_data = PulseTraceRunner(out_dir=str(tmp_path / "data"), profile="test")
    runner_data.synth(0)
    with pytest.raises(EmptyInputError):
        runner.train(str(tmp_path / "data"), TrainConfig(profile="test", epochs=1))


def test_bench_without_checkpoint(tmp_path):
    report = PulseTraceRunner(out_dir=str(tmp_path), profile="test").bench(stream_length=3, warmup=0)
    assert report.frames == 3
    assert set(report.stages) == {"encode", "step", "predict", "frame"}
    assert report.summary()["fps"] == report.fps
    assert (tmp_path / "bench.jsonl").exists()


def test_evaluate_refuses_empty_recorded_split(tmp_path):
    """Four sequences split 4/0/0, so the checkpoint holds no test sequences to report on."""
    data = tmp_path / "data"
    PulseTraceRunner(out_dir=str(data), profile="test", seed=2).synth(4)
    checkpoint = checkpoint_from_network(DiameterNetwork(build_profile("test"), seed=0))
    checkpoint.extra["test_ids"] = ""
    path = tmp_path / "no_test.ptck"
    save_checkpoint(checkpoint, str(path))

    runner = PulseTraceRunner(out_dir=str(tmp_path / "out"), profile="test")
    with pytest.raises(EmptyInputError, match="held-out"):
        runner.evaluate(str(path), str(data))
    assert not (tmp_path / "out" / "eval_report.csv").exists()


@pytest.fixture
def corrupt_sequence(tmp_path):
    seq = make_phantom(length=12, seed=5)
    seq.frames[5, 0, 10, 10] = 1.5
    path = tmp_path / "bad.usq"
    write_sequence(seq, str(path))
    return str(path)


@pytest.fixture
def seeded_checkpoint(tmp_path):
    path = tmp_path / "model.ptck"
    save_checkpoint(checkpoint_from_network(DiameterNetwork(build_profile("test"), seed=0)), str(path))
    return str(path)


@pytest.mark.parametrize("prefetch", [1, 3])
def test_infer_failure_stops_prefetch_reader(tmp_path, corrupt_sequence, seeded_checkpoint, prefetch):
    before = {t.ident for t in threading.enumerate()}
    runner = PulseTraceRunner(out_dir=str(tmp_path / "out"), profile="test")
    with pytest.raises(DataFormatError):
        runner.infer(seeded_checkpoint, corrupt_sequence, prefetch=prefetch)
    leftover = [t for t in threading.enumerate() if t.ident not in before and t.name == "usq-prefetch"]
    assert leftover == []


def test_abandoned_prefetch_releases_reader(tmp_path):
    path = tmp_path / "long.usq"
    write_sequence(make_phantom(length=30, seed=6), str(path))
    runner = PulseTraceRunner(out_dir=str(tmp_path), profile="test")
    frames = runner._prefetched(str(path), 1)
    assert next(frames)[0] == 1
    frames.close()
    assert not any(t.name == "usq-prefetch" for t in threading.enumerate())
