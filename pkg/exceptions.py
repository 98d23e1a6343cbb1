# exceptions.py
"""Error hierarchy shared by every package.

Each error carries the process exit code the command line maps it to:
1 usage/config, 2 data/format, 3 numerical failure.
"""
from typing import Optional


class PulseTraceError(Exception):
    """Base class for all errors raised by the engine."""

    exit_code: int = 1


# --- usage / configuration (exit code 1) ---

class ConfigError(PulseTraceError, ValueError):
    """Invalid configuration value, unknown key or inconsistent profile."""


class ShapeError(PulseTraceError, ValueError):
    """Tensor shapes do not agree."""

    def __init__(self, message: str, axis: Optional[int] = None):
        self.axis = axis
        if axis is not None:
            message = f"{message} (axis {axis})"
        super().__init__(message)


class DegenerateOutputError(ShapeError):
    """A layer spec would produce an output extent below 1."""


class EmptyInputError(PulseTraceError, ValueError):
    """An operation received an empty sequence or sample."""


class MissingForwardStateError(PulseTraceError, RuntimeError):
    """A backward pass was requested without a retained forward pass."""


# --- data / format (exit code 2) ---

class DataFormatError(PulseTraceError):
    exit_code = 2


class MagicMismatchError(DataFormatError):
    """File does not start with the expected magic bytes."""


class TruncatedPayloadError(DataFormatError):
    """File ended before the declared payload was read."""


class UnsupportedVersionError(DataFormatError):
    """File declares a format version this build cannot read."""


class VesselOutOfFrameError(DataFormatError):
    """A phantom vessel (lumen plus walls) does not fit inside the frame."""


class MissingKeyError(DataFormatError):
    """A checkpoint lacks a parameter the model requires."""


class PayloadSizeError(DataFormatError):
    """A stored tensor does not have the size the model expects."""


class ProfileMismatchError(DataFormatError):
    """Checkpoint, model profile and data disagree on layer shapes."""


# --- numerical (exit code 3) ---

class NumericalError(PulseTraceError):
    exit_code = 3


class NonFiniteGradientError(NumericalError):
    """A parameter gradient holds NaN or Inf."""

    def __init__(self, key: str):
        self.key = key
        super().__init__(f"non-finite gradient in parameter '{key}'")


class DivergenceError(NumericalError):
    """Training loss became NaN or Inf."""

    def __init__(self, sequence_id: str, loss: float):
        self.sequence_id = sequence_id
        self.loss = loss
        super().__init__(f"training diverged on sequence '{sequence_id}' (loss={loss})")


# --- loss-domain signals ---

class NoPeaksError(PulseTraceError):
    """Fewer than two peaks were found, so no cardiac period can be estimated."""

    exit_code = 2


class SequenceTooShortError(PulseTraceError, ValueError):
    """The trace does not span two full cardiac periods."""
