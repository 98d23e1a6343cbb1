# runner.py
import csv
import logging
import os
import queue
import threading
import time
import uuid
from contextlib import closing
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

import config
from exceptions import EmptyInputError, ProfileMismatchError
from models import DiameterNetwork, build_profile
from monitoring import PerformanceTracker, ReportWriter, log_manager
from phantoms import (
    PhantomRanges,
    PhantomSpec,
    export_ground_truth_csv,
    generate,
    iter_frames,
    load_sequences,
    read_header,
    sample_spec,
    split,
    write_manifest,
    write_sequence,
)
from training import (
    TrainConfig,
    evaluate,
    ks_compare,
    load_checkpoint,
    network_from_checkpoint,
    save_checkpoint,
    train,
)

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.ptck"
LOSS_HISTORY_CSV = "loss_history.csv"
BENCH_JSONL = "bench.jsonl"
_END = object()
PREFETCH_POLL_S = 0.05


def throughput(frames: int, elapsed_s: float) -> float:
    """Frames per second; 0 when nothing was timed."""
    return frames / elapsed_s if elapsed_s > 0 else 0.0


@dataclass
class BenchReport:
    frames: int
    elapsed_s: float
    stages: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @property
    def fps(self) -> float:
        return throughput(self.frames, self.elapsed_s)

    @property
    def real_time(self) -> bool:
        return self.fps >= config.EVAL_CONFIG["realtime_fps"]

    def summary(self) -> Dict[str, Any]:
        frame_stats = self.stages.get("frame", {})
        return {
            "summary": True,
            "frames": self.frames,
            "elapsed_s": self.elapsed_s,
            "fps": self.fps,
            "mean_latency_ms": frame_stats.get("mean"),
            "p99_latency_ms": frame_stats.get("p99"),
            "real_time": self.real_time,
            "reference_fps": config.EVAL_CONFIG["reference_fps"],
        }


class PulseTraceRunner:
    """
    Implements the pipeline commands on top of the phantom, model and
    training packages. Every command reads its inputs from disk, writes its
    artifacts into ``out_dir`` and returns the paths or values it produced.
    """

    def __init__(self, out_dir: str = "runs", profile: str = config.TRAINING_CONFIG["profile"],
                 seed: int = config.TRAINING_CONFIG["seed"]):
        if profile not in config.PROFILES:
            raise ValueError(f"unknown profile {profile!r}")
        self.out_dir = out_dir
        self.profile = profile
        self.seed = seed
        self.run_id = uuid.uuid4().hex[:8]
        log_manager.set_context(run_id=self.run_id, profile=profile)
        self.logger = log_manager.get_logger(__name__)

    def _out(self, *parts: str) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, *parts)

    @property
    def frame_size(self) -> int:
        return config.PHANTOM_CONFIG["frame_size"][self.profile]

    @property
    def pixel_pitch(self) -> float:
        return config.PHANTOM_CONFIG["pixel_pitch"][self.profile]

    # --- synth ---

    def synth(self, count: int, ranges: Optional[PhantomRanges] = None) -> str:
        """
        Generate ``count`` phantom sequences plus their manifest.

        Args:
            count: number of sequences (0 writes an empty manifest)
            ranges: phantom population; defaults from PHANTOM_CONFIG

        Returns:
            str: path of manifest.csv
        """
        if count < 0:
            raise ValueError("count must be >= 0")
        os.makedirs(self.out_dir, exist_ok=True)
        rng = np.random.default_rng(self.seed)
        children = np.random.SeedSequence(self.seed).spawn(count)
        rows = []
        for index, child in enumerate(children):
            spec, length = sample_spec(rng, ranges)
            sequence_id = f"seq{index:03d}"
            seq = generate(spec, length, seed=int(child.generate_state(1)[0]), frame_size=self.frame_size,
                           pixel_pitch=self.pixel_pitch, frame_rate=config.PHANTOM_CONFIG["frame_rate"],
                           sequence_id=sequence_id)
            filename = f"{sequence_id}.usq"
            write_sequence(seq, self._out(filename))
            export_ground_truth_csv(seq, self._out(f"{sequence_id}_truth.csv"))
            rows.append({"id": sequence_id, "K": length, "T": spec.period_frames,
                         "d0": round(spec.d0_mm, 6), "a": round(spec.amplitude_mm, 6), "file": filename})
        path = write_manifest(rows, self.out_dir)
        self.logger.info(f"Synthesized {count} sequences into {self.out_dir}")
        return path

    # --- train / eval ---

    def train(self, data_dir: str, cfg: TrainConfig) -> str:
        """Train on the dataset in ``data_dir``; returns the checkpoint path."""
        sequences = load_sequences(data_dir)
        if not sequences:
            raise EmptyInputError(f"no sequences in {data_dir}")
        self._check_frames(sequences.values(), cfg.profile)
        dataset = split(list(sequences), config.TRAINING_CONFIG["split_fractions"], seed=cfg.seed)
        self.logger.info(f"Training {cfg.profile}/{cfg.variant} on {dataset.sizes()} (train/val/test) sequences")

        if cfg.checkpoint_dir is None and cfg.checkpoint_every:
            cfg = cfg.model_copy(update={"checkpoint_dir": self._out("snapshots")})
        checkpoint, history = train(sequences, dataset, cfg)
        checkpoint.extra["test_ids"] = ",".join(dataset.test)

        path = self._out(CHECKPOINT_NAME)
        save_checkpoint(checkpoint, path)
        history.drop(columns=["duration_s"]).to_csv(self._out(LOSS_HISTORY_CSV), index=False)
        ReportWriter(self.out_dir).plot_loss_curve(history)
        return path

    def evaluate(self, checkpoint_path: str, data_dir: str, compare_path: Optional[str] = None) -> Dict[str, Any]:
        """
        Evaluate a checkpoint on the test sequences it was trained for and write
        the CSV report and summary. A checkpoint that records no split at all is
        evaluated on every sequence in ``data_dir``; one whose recorded test
        split is empty raises EmptyInputError.

        Returns:
            Dict[str, Any]: aggregate metrics, plus the KS comparison when ``compare_path`` is given
        """
        checkpoint = load_checkpoint(checkpoint_path, expected_profile=self.profile)
        recorded = checkpoint.extra.get("test_ids")
        if recorded is None:
            self.logger.warning(f"{os.path.basename(checkpoint_path)} records no test split; "
                                f"evaluating every sequence in {data_dir}")
            sequences = load_sequences(data_dir)
        else:
            test_ids = [i for i in recorded.split(",") if i]
            if not test_ids:
                raise EmptyInputError(f"{os.path.basename(checkpoint_path)} was trained without a held-out "
                                      f"test split; there is nothing to evaluate")
            sequences = load_sequences(data_dir, test_ids)
        if not sequences:
            raise EmptyInputError(f"no test sequences found in {data_dir}")
        report = evaluate(checkpoint, list(sequences.values()))

        comparison = None
        if compare_path:
            other = evaluate(load_checkpoint(compare_path, expected_profile=self.profile), list(sequences.values()))
            ks = ks_compare(report.frame_errors, other.frame_errors)
            comparison = {"against": os.path.basename(compare_path), "statistic": ks.statistic,
                          "p_value": ks.p_value, "alpha": ks.alpha, "comparisons": ks.comparisons,
                          "threshold": ks.threshold, "significant": ks.significant}

        writer = ReportWriter(self.out_dir)
        writer.write_eval_csv(report.per_sequence)
        summary = report.summary()
        writer.write_eval_summary(summary, comparison, title=f"Evaluation of {os.path.basename(checkpoint_path)}")
        if comparison is not None:
            summary["comparison"] = comparison
        return summary

    def _check_frames(self, sequences, profile: str) -> None:
        extent = build_profile(profile).frame_extent
        for seq in sequences:
            if seq.frame_size != (extent, extent):
                raise ProfileMismatchError(f"sequence '{seq.sequence_id}' has {seq.frame_size[0]}x"
                                           f"{seq.frame_size[1]} frames, profile '{profile}' needs {extent}x{extent}")

    # --- infer ---

    def _prefetched(self, path: str, capacity: int) -> Iterator[Tuple[int, np.ndarray, float]]:
        """Read frames on a worker thread through a bounded queue, preserving order.

        Closing the generator (or an error in the consumer) stops the reader,
        which then releases the file and exits.
        """
        handoff: "queue.Queue" = queue.Queue(maxsize=capacity)
        stop = threading.Event()

        def offer(item) -> bool:
            while not stop.is_set():
                try:
                    handoff.put(item, timeout=PREFETCH_POLL_S)
                    return True
                except queue.Full:
                    continue
            return False

        def reader():
            frames = iter_frames(path)
            try:
                for item in frames:
                    if not offer(item):
                        return
            except Exception as e:  # re-raised on the consumer side
                offer(e)
                return
            finally:
                frames.close()
            offer(_END)

        thread = threading.Thread(target=reader, name="usq-prefetch", daemon=True)
        thread.start()
        try:
            while True:
                item = handoff.get()
                if item is _END:
                    break
                if isinstance(item, Exception):
                    raise item
                yield item
        finally:
            stop.set()
            while True:
                try:
                    handoff.get_nowait()
                except queue.Empty:
                    break
            thread.join()

    def infer(self, checkpoint_path: str, sequence_path: str, out_path: Optional[str] = None,
              prefetch: int = 0) -> str:
        """Stream a sequence through the network, writing one CSV row per frame as it is predicted."""
        checkpoint = load_checkpoint(checkpoint_path, expected_profile=self.profile)
        network = network_from_checkpoint(checkpoint)
        header = read_header(sequence_path)
        extent = network.config.frame_extent
        if (header.rows, header.cols) != (extent, extent):
            raise ProfileMismatchError(f"{sequence_path} has {header.rows}x{header.cols} frames, "
                                       f"the checkpoint expects {extent}x{extent}")

        out_path = out_path or self._out(os.path.splitext(os.path.basename(sequence_path))[0] + "_pred.csv")
        frames = self._prefetched(sequence_path, prefetch) if prefetch > 0 else iter_frames(sequence_path)
        network.reset_stream()
        rows = 0
        with closing(frames), open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["frame_index", "y_pred_mm", "y_true_mm"])
            for frame_index, frame, y_true in frames:
                y_pred = network.predict_next(frame)
                writer.writerow([frame_index, f"{y_pred:.6f}", f"{y_true:.6f}"])
                rows += 1
        self.logger.info(f"Wrote {rows} predictions to {out_path}")
        return out_path

    # --- bench ---

    def bench(self, checkpoint_path: Optional[str] = None, stream_length: int = config.EVAL_CONFIG["bench_frames"],
              warmup: int = config.EVAL_CONFIG["bench_warmup"], out_path: Optional[str] = None) -> BenchReport:
        """
        Time the encode -> step -> predict path frame by frame.

        Frames are rendered before timing starts and the weights stay frozen.

        Args:
            checkpoint_path: trained weights; a freshly initialised network otherwise
            stream_length: number of timed frames
            warmup: untimed frames run first
            out_path: JSON-lines output path

        Returns:
            BenchReport: per-stage latencies and throughput
        """
        if stream_length < 1:
            raise ValueError("stream length must be >= 1")
        if checkpoint_path:
            network = network_from_checkpoint(load_checkpoint(checkpoint_path, expected_profile=self.profile))
        else:
            network = DiameterNetwork(build_profile(self.profile), seed=self.seed)

        spec = PhantomSpec(speckle_strength=config.PHANTOM_CONFIG["speckle_strength"])
        stream = generate(spec, warmup + stream_length, seed=self.seed, frame_size=self.frame_size,
                          pixel_pitch=self.pixel_pitch).frames

        network.reset_stream()
        for frame in stream[:warmup]:
            network.predict_next(frame)

        tracker = PerformanceTracker()
        clock = time.perf_counter
        started = clock()
        for frame in stream[warmup:]:
            t0 = clock()
            feature = network.encode(frame)
            t1 = clock()
            state = network.advance(feature)
            t2 = clock()
            network.head.predict(state)
            t3 = clock()
            tracker.record("encode", (t1 - t0) * 1000)
            tracker.record("step", (t2 - t1) * 1000)
            tracker.record("predict", (t3 - t2) * 1000)
            tracker.record("frame", (t3 - t0) * 1000)
        elapsed = clock() - started

        report = BenchReport(frames=stream_length, elapsed_s=elapsed, stages=tracker.get_performance_metrics())
        for stage, stats in report.stages.items():
            log_manager.log_stage_timing(stage, stats)
        tracker.export_jsonl(out_path or self._out(BENCH_JSONL), extra=[report.summary()])
        self.logger.info(f"Bench: {report.fps:.1f} fps over {stream_length} frames "
                         f"(real-time: {str(report.real_time).lower()})")
        return report
