# phantoms/augmentation.py
from dataclasses import replace
from typing import Tuple

import numpy as np

from .generator import UltrasoundSequence


def augment_flip(seq: UltrasoundSequence, horizontal: bool, vertical: bool) -> UltrasoundSequence:
    """Apply one flip to every frame of the sequence; diameters are unchanged."""
    frames = seq.frames
    if horizontal:
        frames = frames[:, :, :, ::-1]
    if vertical:
        frames = frames[:, :, ::-1, :]
    if not (horizontal or vertical):
        return seq
    return replace(seq, frames=np.ascontiguousarray(frames))


def random_flip(seq: UltrasoundSequence, rng: np.random.Generator) -> Tuple[UltrasoundSequence, Tuple[bool, bool]]:
    """Draw horizontal and vertical flips independently with probability 0.5."""
    horizontal, vertical = (bool(flag) for flag in rng.random(2) < 0.5)
    return augment_flip(seq, horizontal, vertical), (horizontal, vertical)
