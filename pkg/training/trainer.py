# training/trainer.py
"""Sequence-level training loop: one Adam step per sequence, full BPTT."""
import copy
import logging
import os
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

import config
from exceptions import ConfigError, DivergenceError, EmptyInputError
from models import DiameterNetwork, build_profile
from monitoring import MetricsCollector, log_manager
from phantoms import DatasetSplit, UltrasoundSequence, random_flip
from .checkpoint import Checkpoint, checkpoint_from_network, save_checkpoint
from .evaluation import evaluate
from .losses import CycleInfo, DiameterTrace, LossConfig, cyclic_loss, mse, total_loss, training_cycle
from .optimizer import Adam

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(config.TRAINING_CONFIG["epochs"], ge=1)
    learning_rate: float = Field(config.TRAINING_CONFIG["learning_rate"], ge=0)
    lam: float = Field(config.TRAINING_CONFIG["lambda"], ge=0)
    seed: int = config.TRAINING_CONFIG["seed"]
    profile: Literal["full", "test"] = config.TRAINING_CONFIG["profile"]
    variant: Literal["framewise", "cgru"] = config.TRAINING_CONFIG["variant"]
    augment: bool = config.TRAINING_CONFIG["augment"]
    # 0 disables periodic snapshots
    checkpoint_every: int = Field(config.TRAINING_CONFIG["checkpoint_every"], ge=0)
    checkpoint_dir: Optional[str] = None
    progress: bool = False


class Trainer:
    """Owns the network, the optimizer and the loss history of one training run."""

    def __init__(self, cfg: TrainConfig, network: Optional[DiameterNetwork] = None):
        self.cfg = cfg
        self.network = network or DiameterNetwork(build_profile(cfg.profile, cfg.variant), seed=cfg.seed)
        if self.network.profile != cfg.profile or self.network.variant != cfg.variant:
            raise ConfigError(f"network is {self.network.profile}/{self.network.variant}, "
                              f"config asks for {cfg.profile}/{cfg.variant}")
        self.optimizer = Adam(self.network.parameters(), lr=cfg.learning_rate)
        self.loss_config = LossConfig(lam=cfg.lam)
        self.metrics = MetricsCollector()
        self.rng = np.random.default_rng(cfg.seed)
        self._cycles: Dict[str, Optional[CycleInfo]] = {}
        self.best: Optional[Checkpoint] = None
        self._best_score = float("inf")

    def _cycle(self, seq: UltrasoundSequence) -> Optional[CycleInfo]:
        if self.loss_config.lam == 0:
            return None
        key = seq.sequence_id or str(seq.seed)
        if key not in self._cycles:
            self._cycles[key] = training_cycle(seq.y, seq.frame_rate)
        return self._cycles[key]

    def train_step(self, seq: UltrasoundSequence) -> float:
        """Forward, loss, BPTT and one optimizer step for a single sequence."""
        y_hat = self.network.forward_sequence(seq.frames, train=True)
        trace = DiameterTrace(y_hat=y_hat, y=seq.y, frame_rate=seq.frame_rate)
        cycle = self._cycle(seq)
        loss, grad = total_loss(trace, cycle, self.loss_config)
        if not np.isfinite(loss):
            self.network.clear()
            raise DivergenceError(seq.sequence_id or str(seq.seed), loss)
        self.network.backward_sequence(grad)
        self.optimizer.step()
        cl = cyclic_loss(trace.y_hat, cycle) if cycle is not None else None
        self.metrics.record_sequence(seq.sequence_id, loss, mse(trace), cl)
        return loss

    def validation_mse(self, sequences: Sequence[UltrasoundSequence]) -> Optional[float]:
        if not sequences:
            return None
        # single worker keeps the loss history bit-identical between runs
        return evaluate(self.network, sequences, workers=1).mse_mean

    def _snapshot(self, epoch: int) -> Checkpoint:
        return checkpoint_from_network(
            self.network,
            epoch=epoch,
            seed=self.cfg.seed,
            loss_curve=self.metrics.loss_curve,
            optimizer=copy.deepcopy(self.optimizer.state),
            extra={
                "learning_rate": repr(self.cfg.learning_rate),
                "lambda": repr(self.cfg.lam),
                "augment": str(self.cfg.augment).lower(),
            },
        )

    def fit(self, train_set: Sequence[UltrasoundSequence],
            validation_set: Sequence[UltrasoundSequence] = ()) -> Tuple[Checkpoint, pd.DataFrame]:
        """
        Train for ``cfg.epochs`` epochs.

        Args:
            train_set: sequences visited once per epoch in a seeded random order
            validation_set: sequences used for model selection; without them the
                training loss selects the checkpoint

        Returns:
            Tuple[Checkpoint, pd.DataFrame]: best checkpoint and the per-epoch loss history
        """
        if not train_set:
            raise EmptyInputError("training needs at least one sequence")
        epochs = range(1, self.cfg.epochs + 1)
        for epoch in tqdm(epochs, desc="epochs", unit="epoch", disable=not self.cfg.progress):
            self.metrics.start_epoch(epoch)
            for index in self.rng.permutation(len(train_set)):
                seq = train_set[index]
                if self.cfg.augment:
                    seq, _ = random_flip(seq, self.rng)
                self.train_step(seq)
            val_mse = self.validation_mse(validation_set)
            row = self.metrics.complete_epoch(val_mse)
            log_manager.log_epoch(epoch, row["train_loss"], val_mse, row["duration_s"],
                                  steps=row["steps"], cl_sequences=row["cl_sequences"])

            score = val_mse if val_mse is not None else row["train_loss"]
            if score < self._best_score:
                self._best_score = score
                self.best = self._snapshot(epoch)
                logger.debug(f"New best model at epoch {epoch} (score {score:.5f})")

            if self.cfg.checkpoint_dir and self.cfg.checkpoint_every and epoch % self.cfg.checkpoint_every == 0:
                os.makedirs(self.cfg.checkpoint_dir, exist_ok=True)
                save_checkpoint(self._snapshot(epoch), os.path.join(self.cfg.checkpoint_dir, f"epoch_{epoch:04d}.ptck"))

        if self.best is None:
            # every score was NaN; keep the final weights
            self.best = self._snapshot(self.cfg.epochs)
        self.best.loss_curve = self.metrics.loss_curve
        return self.best, self.metrics.history()


def _select(sequences: Mapping[str, UltrasoundSequence], ids: Sequence[str]) -> List[UltrasoundSequence]:
    return [sequences[i] for i in ids]


def train(sequences: Mapping[str, UltrasoundSequence], split: DatasetSplit,
          cfg: TrainConfig) -> Tuple[Checkpoint, pd.DataFrame]:
    """Train on ``split.train`` with model selection on ``split.validation``."""
    if not split.train:
        raise EmptyInputError("the training split is empty")
    trainer = Trainer(cfg)
    checkpoint, history = trainer.fit(_select(sequences, split.train), _select(sequences, split.validation))
    checkpoint.extra["split_fractions"] = ",".join(repr(f) for f in split.fractions)
    return checkpoint, history


ABLATION_ARMS = (
    ("framewise", "framewise", 0.0),
    ("cgru", "cgru", 0.0),
    ("cgru+cl", "cgru", None),
)


def run_ablation(sequences: Mapping[str, UltrasoundSequence], split: DatasetSplit,
                 cfg: TrainConfig) -> pd.DataFrame:
    """Train the frame-wise, +C-GRU and +C-GRU+CL models on one split and score them on its test set.

    The CL arm uses ``cfg.lam``; the other two train with plain MSE.
    """
    test_set = _select(sequences, split.test) or _select(sequences, split.validation)
    if not test_set:
        raise EmptyInputError("ablation needs a test or validation split to score on")
    rows = []
    for arm, variant, lam in ABLATION_ARMS:
        arm_cfg = cfg.model_copy(update={"variant": variant, "lam": cfg.lam if lam is None else lam})
        checkpoint, _ = train(sequences, split, arm_cfg)
        report = evaluate(checkpoint, test_set, workers=1)
        rows.append({"arm": arm, "seed": cfg.seed, "test_mse": report.mse_mean,
                     "test_re": report.re_mean, "prediction_cl": report.cl_mean})
        logger.info(f"Ablation arm {arm}: test MSE {report.mse_mean:.4f}, prediction CL {report.cl_mean:.4f}")
    return pd.DataFrame(rows)
