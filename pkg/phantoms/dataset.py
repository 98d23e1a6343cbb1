# phantoms/dataset.py
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from exceptions import ConfigError, DataFormatError, EmptyInputError
from .generator import UltrasoundSequence
from .sequence_io import read_sequence

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ["id", "K", "T", "d0", "a", "file"]


@dataclass
class DatasetSplit:
    train: List[str]
    validation: List[str]
    test: List[str]
    fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2)

    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def split(ids: Sequence[str], fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2),
          seed: int = 0) -> DatasetSplit:
    """Seeded shuffle, then validation/test sizes at floor boundaries; the remainder trains."""
    if len(ids) == 0:
        raise EmptyInputError("cannot split an empty id list")
    if len(fractions) != 3 or min(fractions) < 0 or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ConfigError(f"split fractions must be three non-negative values summing to 1, got {fractions}")
    order = list(np.random.default_rng(seed).permutation(len(ids)))
    shuffled = [ids[i] for i in order]
    n_val = math.floor(len(ids) * fractions[1])
    n_test = math.floor(len(ids) * fractions[2])
    n_train = len(ids) - n_val - n_test
    return DatasetSplit(
        train=shuffled[:n_train],
        validation=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
        fractions=tuple(fractions),
    )


def write_manifest(rows: List[Dict], directory: str) -> str:
    path = os.path.join(directory, MANIFEST_NAME)
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(path, index=False)
    return path


def read_manifest(directory: str) -> pd.DataFrame:
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(path):
        raise DataFormatError(f"no {MANIFEST_NAME} in {directory}")
    manifest = pd.read_csv(path, dtype={"id": str, "file": str})
    missing = set(MANIFEST_COLUMNS) - set(manifest.columns)
    if missing:
        raise DataFormatError(f"{path} lacks columns {sorted(missing)}")
    return manifest


def load_sequences(directory: str, ids: Sequence[str] = None) -> Dict[str, UltrasoundSequence]:
    """Read the manifest's .usq files, keyed by sequence id (manifest order)."""
    manifest = read_manifest(directory)
    wanted = set(ids) if ids is not None else None
    sequences = {}
    for row in manifest.itertuples(index=False):
        if wanted is not None and row.id not in wanted:
            continue
        seq = read_sequence(os.path.join(directory, row.file))
        seq.sequence_id = row.id
        seq.true_period = int(row.T)
        sequences[row.id] = seq
    logger.info(f"Loaded {len(sequences)} sequences from {directory}")
    return sequences
