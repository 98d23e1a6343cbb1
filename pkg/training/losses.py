# training/losses.py
"""Training objective: MSE + lambda * CyclicLoss.

CyclicLoss is the L2 norm of the stacked differences between predictions
one cardiac period apart,

    CL = sqrt( sum_{n=1..P} sum_{t=0..T-1} (y_hat[t+(n-1)T] - y_hat[t+nT])^2 ),

with P = floor(K/T) - 1 adjacent-cycle pairs. The period T comes from peak
detection on the ground truth, so it is only needed during training.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

import config
from exceptions import EmptyInputError, NoPeaksError, SequenceTooShortError, ShapeError

logger = logging.getLogger(__name__)


@dataclass
class DiameterTrace:
    y_hat: np.ndarray
    y: Optional[np.ndarray] = None
    frame_rate: float = 47.0

    def __post_init__(self):
        self.y_hat = np.asarray(self.y_hat, dtype=np.float64)
        if self.y_hat.ndim != 1 or len(self.y_hat) < 1:
            raise EmptyInputError("a diameter trace needs at least one prediction")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.float64)
            if self.y.shape != self.y_hat.shape:
                raise ShapeError(f"{len(self.y_hat)} predictions but {len(self.y)} ground-truth values")

    @property
    def length(self) -> int:
        return len(self.y_hat)


@dataclass(frozen=True)
class CycleInfo:
    period: int
    n_cycles: int

    def __post_init__(self):
        if self.period < 2:
            raise ValueError(f"cardiac period must be >= 2 frames, got {self.period}")
        if self.n_cycles < 1:
            raise ValueError(f"cycle count must be >= 1, got {self.n_cycles}")


@dataclass(frozen=True)
class LossConfig:
    lam: float = field(default_factory=lambda: config.TRAINING_CONFIG["lambda"])
    sqrt_epsilon: float = config.LOSS_CONFIG["sqrt_epsilon"]

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")


def _require_truth(trace: DiameterTrace) -> np.ndarray:
    if trace.y is None:
        raise ValueError("MSE needs ground-truth diameters")
    return trace.y


def mse(trace: DiameterTrace) -> float:
    y = _require_truth(trace)
    return float(np.mean((y - trace.y_hat) ** 2))


def mse_grad(trace: DiameterTrace) -> np.ndarray:
    y = _require_truth(trace)
    return 2.0 * (trace.y_hat - y) / trace.length


def detect_period(y: np.ndarray, frame_rate: float = 47.0,
                  min_period: int = config.LOSS_CONFIG["min_period"],
                  prominence: float = config.LOSS_CONFIG["peak_prominence"]) -> CycleInfo:
    """Cardiac period as the rounded mean peak-to-peak distance of the ground truth.

    Peaks need a prominence of at least ``prominence`` times the trace range and
    are at least ``min_period`` frames apart.
    """
    y = np.asarray(y, dtype=np.float64)
    span = float(y.max() - y.min()) if len(y) else 0.0
    if span <= 0:
        raise NoPeaksError("constant trace has no peaks")
    peaks, _ = find_peaks(y, prominence=prominence * span, distance=min_period)
    if len(peaks) < 2:
        raise NoPeaksError(f"found {len(peaks)} peak(s) in a {len(y)}-frame trace, need at least 2")
    period = int(round(float(np.mean(np.diff(peaks)))))
    logger.debug(f"Detected period {period} frames ({frame_rate * 60 / period:.0f} bpm) from {len(peaks)} peaks")
    return CycleInfo(period=period, n_cycles=len(y) // period)


def _pairs(length: int, cycle: CycleInfo) -> Tuple[int, int]:
    period = cycle.period
    cycles = min(cycle.n_cycles, length // period)
    if cycles < 2:
        raise SequenceTooShortError(f"{length} frames hold fewer than two full periods of {period}")
    return period, cycles


def cyclic_loss(y_hat: np.ndarray, cycle: CycleInfo, cfg: Optional[LossConfig] = None) -> float:
    y_hat = np.asarray(y_hat, dtype=np.float64)
    period, cycles = _pairs(len(y_hat), cycle)
    d = y_hat[:(cycles - 1) * period] - y_hat[period:cycles * period]
    return float(np.sqrt(np.sum(d * d)))


def cyclic_loss_grad(y_hat: np.ndarray, cycle: CycleInfo, cfg: Optional[LossConfig] = None) -> np.ndarray:
    cfg = cfg or LossConfig()
    y_hat = np.asarray(y_hat, dtype=np.float64)
    period, cycles = _pairs(len(y_hat), cycle)
    d = y_hat[:(cycles - 1) * period] - y_hat[period:cycles * period]
    total = float(np.sum(d * d))
    grad = np.zeros_like(y_hat)
    if total == 0.0:
        return grad
    scaled = d / np.sqrt(total + cfg.sqrt_epsilon)
    grad[:(cycles - 1) * period] += scaled
    grad[period:cycles * period] -= scaled
    return grad


def total_loss(trace: DiameterTrace, cycle: Optional[CycleInfo],
               cfg: Optional[LossConfig] = None) -> Tuple[float, np.ndarray]:
    """MSE + lambda * CL and its gradient wrt y_hat; exactly MSE when cycle is None or lambda is 0."""
    cfg = cfg or LossConfig()
    loss = mse(trace)
    grad = mse_grad(trace)
    if cycle is None or cfg.lam == 0:
        return loss, grad
    loss += cfg.lam * cyclic_loss(trace.y_hat, cycle, cfg)
    grad = grad + cfg.lam * cyclic_loss_grad(trace.y_hat, cycle, cfg)
    return loss, grad


def training_cycle(y: np.ndarray, frame_rate: float = 47.0) -> Optional[CycleInfo]:
    """Period for CyclicLoss, or None when the sequence cannot support it."""
    try:
        cycle = detect_period(y, frame_rate)
    except NoPeaksError as e:
        logger.warning(f"CyclicLoss disabled for sequence: {e}")
        return None
    if min(cycle.n_cycles, len(y) // cycle.period) < 2:
        logger.info(f"CyclicLoss disabled: {len(y)} frames span fewer than two periods of {cycle.period}")
        return None
    return cycle
