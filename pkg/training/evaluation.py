# training/evaluation.py
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import ks_2samp

import config
from exceptions import EmptyInputError, ProfileMismatchError, SequenceTooShortError
from models import DiameterNetwork
from phantoms import UltrasoundSequence
from .checkpoint import Checkpoint, network_from_checkpoint
from .losses import DiameterTrace, cyclic_loss, mse, training_cycle

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["sequence_id", "mse_mm2", "re_percent"]


def relative_error(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Mean absolute relative error in percent: (100 / K) * sum |y_hat - y| / y."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise EmptyInputError("relative error of an empty trace")
    return float(100.0 * np.mean(np.abs(y_hat - y) / y))


@dataclass
class SequenceResult:
    sequence_id: str
    y_hat: np.ndarray
    y: np.ndarray
    mse_mm2: float
    re_percent: float
    # CyclicLoss of the predictions, NaN when no period can be measured
    cl: float = float("nan")

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(self.y_hat - self.y)


@dataclass
class EvalReport:
    """Per-sequence metrics plus the per-frame errors needed for KS tests."""

    results: List[SequenceResult] = field(default_factory=list)

    @property
    def per_sequence(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[r.sequence_id, r.mse_mm2, r.re_percent] for r in self.results],
            columns=REPORT_COLUMNS,
        )

    @property
    def frame_errors(self) -> np.ndarray:
        if not self.results:
            return np.empty(0)
        return np.concatenate([r.abs_errors for r in self.results])

    @property
    def predictions(self) -> Dict[str, np.ndarray]:
        return {r.sequence_id: r.y_hat for r in self.results}

    def _stat(self, column: str, fn) -> float:
        values = self.per_sequence[column].to_numpy(dtype=np.float64)
        return float(fn(values)) if len(values) else float("nan")

    @property
    def mse_mean(self) -> float:
        return self._stat("mse_mm2", np.mean)

    @property
    def mse_std(self) -> float:
        return self._stat("mse_mm2", np.std)

    @property
    def re_mean(self) -> float:
        return self._stat("re_percent", np.mean)

    @property
    def re_std(self) -> float:
        return self._stat("re_percent", np.std)

    @property
    def cl_mean(self) -> float:
        values = [r.cl for r in self.results if np.isfinite(r.cl)]
        return float(np.mean(values)) if values else float("nan")

    def summary(self) -> Dict[str, float]:
        return {
            "sequences": len(self.results),
            "mse_mean": self.mse_mean,
            "mse_std": self.mse_std,
            "re_mean": self.re_mean,
            "re_std": self.re_std,
            "cl_mean": self.cl_mean,
        }


def _prediction_cl(y_hat: np.ndarray, y: np.ndarray, frame_rate: float) -> float:
    cycle = training_cycle(y, frame_rate)
    if cycle is None:
        return float("nan")
    try:
        return cyclic_loss(y_hat, cycle)
    except SequenceTooShortError:
        return float("nan")


def evaluate_sequence(network: DiameterNetwork, seq: UltrasoundSequence) -> SequenceResult:
    # inference never sees the period; it is measured afterwards for reporting only
    y_hat = network.predict_sequence(seq.frames)
    y = np.asarray(seq.y, dtype=np.float64)
    return SequenceResult(
        sequence_id=seq.sequence_id or str(seq.seed),
        y_hat=y_hat.astype(np.float64),
        y=y,
        mse_mm2=mse(DiameterTrace(y_hat=y_hat, y=y)),
        re_percent=relative_error(y_hat, y),
        cl=_prediction_cl(y_hat, y, seq.frame_rate),
    )


def evaluate(model: Union[Checkpoint, DiameterNetwork], sequences: Sequence[UltrasoundSequence],
             workers: Optional[int] = None) -> EvalReport:
    """Run the model on every test sequence; sequences are evaluated in parallel."""
    network = network_from_checkpoint(model) if isinstance(model, Checkpoint) else model
    extent = network.config.frame_extent
    for seq in sequences:
        if seq.frame_size != (extent, extent):
            raise ProfileMismatchError(
                f"sequence '{seq.sequence_id}' has {seq.frame_size[0]}x{seq.frame_size[1]} frames, the "
                f"'{network.profile}' profile expects {extent}x{extent}"
            )
    workers = workers or config.worker_count()
    if workers > 1 and len(sequences) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(sequences))) as pool:
            results = list(pool.map(lambda s: evaluate_sequence(network, s), sequences))
    else:
        results = [evaluate_sequence(network, s) for s in sequences]
    report = EvalReport(results=results)
    logger.info(f"Evaluated {len(results)} sequences: MSE {report.mse_mean:.4f} ({report.mse_std:.4f}) mm2, "
                f"RE {report.re_mean:.2f} ({report.re_std:.2f}) %")
    return report


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    alpha: float
    comparisons: int

    @property
    def threshold(self) -> float:
        """Bonferroni-corrected significance level."""
        return self.alpha / self.comparisons

    @property
    def significant(self) -> bool:
        return self.p_value < self.threshold


def ks_compare(errors_a: Sequence[float], errors_b: Sequence[float],
               alpha: float = config.EVAL_CONFIG["ks_alpha"],
               comparisons: int = config.EVAL_CONFIG["ks_comparisons"]) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    a = np.asarray(errors_a, dtype=np.float64)
    b = np.asarray(errors_b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise EmptyInputError("KS comparison needs two nonempty samples")
    result = ks_2samp(a, b, method="asymp")
    return KsResult(statistic=float(result.statistic), p_value=float(result.pvalue),
                    alpha=alpha, comparisons=comparisons)
