# monitoring/metrics_collector.py
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_loss", "train_mse", "train_cl", "cl_sequences", "val_mse", "steps", "duration_s"]
SEQUENCE_COLUMNS = ["epoch", "sequence_id", "loss", "mse", "cl", "cl_enabled"]


@dataclass
class EpochContext:
    """Per-sequence losses gathered while an epoch runs."""
    epoch: int
    start_time: float = field(default_factory=time.perf_counter)
    losses: List[float] = field(default_factory=list)
    mses: List[float] = field(default_factory=list)
    cls: List[float] = field(default_factory=list)
    steps: int = 0


class MetricsCollector:
    """Collects training losses per sequence and per epoch."""

    def __init__(self):
        self.active: Optional[EpochContext] = None
        self.sequence_records: List[Dict[str, Any]] = []
        self.epoch_records: List[Dict[str, Any]] = []

    def start_epoch(self, epoch: int) -> EpochContext:
        if self.active is not None:
            logger.warning(f"Epoch {self.active.epoch} was never completed; discarding its metrics")
        self.active = EpochContext(epoch=epoch)
        return self.active

    def record_sequence(self, sequence_id: str, loss: float, mse: float, cl: Optional[float]) -> None:
        """Record one optimizer step; ``cl`` is None when CyclicLoss was disabled for the sequence."""
        if self.active is None:
            raise RuntimeError("record_sequence called outside an epoch")
        context = self.active
        context.steps += 1
        context.losses.append(loss)
        context.mses.append(mse)
        if cl is not None:
            context.cls.append(cl)
        self.sequence_records.append({
            "epoch": context.epoch,
            "sequence_id": sequence_id,
            "loss": loss,
            "mse": mse,
            "cl": cl if cl is not None else float("nan"),
            "cl_enabled": cl is not None,
        })

    def complete_epoch(self, val_mse: Optional[float] = None) -> Dict[str, Any]:
        """
        Close the active epoch and append its summary to the history.

        Args:
            val_mse: validation MSE measured after the epoch, if any

        Returns:
            Dict[str, Any]: the epoch summary row
        """
        if self.active is None:
            raise RuntimeError("complete_epoch called outside an epoch")
        context, self.active = self.active, None
        row = {
            "epoch": context.epoch,
            "train_loss": float(np.mean(context.losses)) if context.losses else float("nan"),
            "train_mse": float(np.mean(context.mses)) if context.mses else float("nan"),
            "train_cl": float(np.mean(context.cls)) if context.cls else float("nan"),
            "cl_sequences": len(context.cls),
            "val_mse": float(val_mse) if val_mse is not None else float("nan"),
            "steps": context.steps,
            "duration_s": time.perf_counter() - context.start_time,
        }
        self.epoch_records.append(row)
        return row

    @property
    def loss_curve(self) -> List[float]:
        return [row["train_loss"] for row in self.epoch_records]

    def history(self) -> pd.DataFrame:
        return pd.DataFrame(self.epoch_records, columns=HISTORY_COLUMNS)

    def sequence_history(self) -> pd.DataFrame:
        return pd.DataFrame(self.sequence_records, columns=SEQUENCE_COLUMNS)

    def get_current_metrics(self) -> Dict[str, Any]:
        last = self.epoch_records[-1] if self.epoch_records else {}
        return {
            "epochs": len(self.epoch_records),
            "steps": sum(row["steps"] for row in self.epoch_records),
            "last_train_loss": last.get("train_loss"),
            "last_val_mse": last.get("val_mse"),
            "active_epoch": self.active.epoch if self.active else None,
        }
