# phantoms/sequence_io.py
"""The ``.usq`` sequence file.

Little-endian layout: magic ``USQ1``, u32 version, u32 K, u32 N, u32 M,
f32 frame_rate, f32 pixel_pitch, u64 seed, K f32 diameters, K*N*M f32 pixels.
"""
import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import pandas as pd

from exceptions import MagicMismatchError, TruncatedPayloadError, UnsupportedVersionError
from .generator import UltrasoundSequence

MAGIC = b"USQ1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIffQ")


@dataclass(frozen=True)
class SequenceHeader:
    version: int
    length: int
    rows: int
    cols: int
    frame_rate: float
    pixel_pitch: float
    seed: int

    @property
    def diameter_bytes(self) -> int:
        return self.length * 4

    @property
    def frame_bytes(self) -> int:
        return self.rows * self.cols * 4

    @property
    def pixel_payload_bytes(self) -> int:
        return self.length * self.frame_bytes

    @property
    def file_size(self) -> int:
        return _HEADER.size + self.diameter_bytes + self.pixel_payload_bytes


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedPayloadError(f"truncated {what}: expected {n} bytes, got {len(data)}")
    return data


def _parse_header(fh) -> SequenceHeader:
    raw = fh.read(_HEADER.size)
    if len(raw) >= 4 and raw[:4] != MAGIC:
        raise MagicMismatchError(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) != _HEADER.size:
        raise TruncatedPayloadError(f"truncated header: {len(raw)} of {_HEADER.size} bytes")
    _, version, length, rows, cols, frame_rate, pixel_pitch, seed = _HEADER.unpack(raw)
    if version != VERSION:
        raise UnsupportedVersionError(f"sequence format version {version} is not supported (expected {VERSION})")
    return SequenceHeader(version, length, rows, cols, frame_rate, pixel_pitch, seed)


def read_header(path: str) -> SequenceHeader:
    with open(path, "rb") as fh:
        return _parse_header(fh)


def write_sequence(seq: UltrasoundSequence, path: str) -> int:
    length = seq.length
    rows, cols = seq.frame_size
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, length, rows, cols, seq.frame_rate, seq.pixel_pitch, seq.seed))
        fh.write(np.ascontiguousarray(seq.y, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(seq.frames, dtype="<f4").tobytes())
        return fh.tell()


def read_sequence(path: str) -> UltrasoundSequence:
    with open(path, "rb") as fh:
        header = _parse_header(fh)
        y = np.frombuffer(_read_exact(fh, header.diameter_bytes, "diameters"), dtype="<f4")
        pixels = np.frombuffer(_read_exact(fh, header.pixel_payload_bytes, "pixel payload"), dtype="<f4")
    frames = pixels.reshape(header.length, 1, header.rows, header.cols).astype(np.float32)
    return UltrasoundSequence(frames=frames, y=y.astype(np.float32), frame_rate=float(header.frame_rate),
                              pixel_pitch=float(header.pixel_pitch), seed=header.seed)


def iter_frames(path: str) -> Iterator[tuple]:
    """Yield (frame_index, 1 x N x M frame, diameter) one frame at a time, starting at 1."""
    with open(path, "rb") as fh:
        header = _parse_header(fh)
        y = np.frombuffer(_read_exact(fh, header.diameter_bytes, "diameters"), dtype="<f4")
        for t in range(header.length):
            raw = _read_exact(fh, header.frame_bytes, f"frame {t + 1}")
            frame = np.frombuffer(raw, dtype="<f4").reshape(1, header.rows, header.cols).astype(np.float32)
            yield t + 1, frame, float(y[t])


def export_ground_truth_csv(seq: UltrasoundSequence, path: str) -> None:
    pd.DataFrame({
        "frame_index": np.arange(1, seq.length + 1),
        "diameter_mm": seq.y,
    }).to_csv(path, index=False)
