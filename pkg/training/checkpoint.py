# training/checkpoint.py
"""The ``PTCK`` checkpoint container.

Layout (little-endian): magic ``PTCK``, u32 version, u32 metadata length,
UTF-8 ``key=value`` metadata lines, then ``[u32 key length][key][tensor]``
records until end of file. Optimizer moments are stored as ordinary records
under ``optim.m.<param>`` and ``optim.v.<param>``.
"""
import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from exceptions import (
    MagicMismatchError,
    MissingKeyError,
    PayloadSizeError,
    ProfileMismatchError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from models import DiameterNetwork, build_profile, expected_shapes
from tensors import read_tensor, write_tensor
from .optimizer import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"PTCK"
VERSION = 1
_M_PREFIX = "optim.m."
_V_PREFIX = "optim.v."


@dataclass
class Checkpoint:
    profile: str
    variant: str
    tensors: Dict[str, np.ndarray]
    epoch: int = 0
    seed: int = 0
    loss_curve: List[float] = field(default_factory=list)
    optimizer: Optional[AdamState] = None
    # free-form training metadata (hyperparameters, split fractions, ...)
    extra: Dict[str, str] = field(default_factory=dict)
    version: int = VERSION

    def metadata(self) -> Dict[str, str]:
        meta = {
            "profile": self.profile,
            "variant": self.variant,
            "epoch": str(self.epoch),
            "seed": str(self.seed),
            "loss_curve": ",".join(repr(float(v)) for v in self.loss_curve),
        }
        if self.optimizer is not None:
            meta.update({
                "optim.step": str(self.optimizer.step),
                "optim.lr": repr(float(self.optimizer.lr)),
                "optim.beta1": repr(float(self.optimizer.beta1)),
                "optim.beta2": repr(float(self.optimizer.beta2)),
                "optim.epsilon": repr(float(self.optimizer.epsilon)),
            })
        meta.update(self.extra)
        return meta


def _encode_metadata(meta: Dict[str, str]) -> bytes:
    lines = []
    for key, value in meta.items():
        if "=" in key or "\n" in key or "\n" in value:
            raise ValueError(f"metadata entry {key!r} cannot be stored as a key=value line")
        lines.append(f"{key}={value}")
    return "\n".join(lines).encode("utf-8")


def _decode_metadata(raw: bytes) -> Dict[str, str]:
    meta = {}
    for line in raw.decode("utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            meta[key] = value
    return meta


def save_checkpoint(checkpoint: Checkpoint, path: str) -> int:
    """Write the checkpoint; returns the file size in bytes."""
    meta = _encode_metadata(checkpoint.metadata())
    records = dict(checkpoint.tensors)
    if checkpoint.optimizer is not None:
        for key in sorted(checkpoint.optimizer.m):
            records[_M_PREFIX + key] = checkpoint.optimizer.m[key]
            records[_V_PREFIX + key] = checkpoint.optimizer.v[key]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", checkpoint.version, len(meta)))
        fh.write(meta)
        for key, value in records.items():
            encoded = key.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            write_tensor(fh, value)
        size = fh.tell()
    logger.info(f"Saved {checkpoint.profile}/{checkpoint.variant} checkpoint (epoch {checkpoint.epoch}) to {path}")
    return size


def _read(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedPayloadError(f"truncated checkpoint {what}: expected {n} bytes, got {len(data)}")
    return data


def _read_records(fh) -> Dict[str, np.ndarray]:
    records = {}
    while True:
        head = fh.read(4)
        if not head:
            return records
        if len(head) != 4:
            raise TruncatedPayloadError("truncated checkpoint record header")
        (length,) = struct.unpack("<I", head)
        key = _read(fh, length, "record key").decode("utf-8")
        records[key] = read_tensor(fh, dtype=np.float32)


def _check_tensors(tensors: Dict[str, np.ndarray], profile: str, variant: str) -> None:
    for key, shape in expected_shapes(profile, variant).items():
        if key not in tensors:
            raise MissingKeyError(f"checkpoint has no tensor '{key}' required by the {profile}/{variant} model")
        if tensors[key].shape != shape:
            raise PayloadSizeError(f"tensor '{key}' has shape {tensors[key].shape}, "
                                   f"the {profile} model expects {shape}")


def load_checkpoint(path: str, expected_profile: Optional[str] = None) -> Checkpoint:
    """Read and validate a checkpoint.

    Args:
        path: checkpoint file
        expected_profile: profile of the run that will consume it, if known

    Returns:
        Checkpoint: with every parameter key of its profile/variant present
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise MagicMismatchError(f"{path} is not a checkpoint (magic {magic!r})")
        version, meta_length = struct.unpack("<II", _read(fh, 8, "header"))
        if version != VERSION:
            raise UnsupportedVersionError(f"checkpoint version {version} is not supported (expected {VERSION})")
        meta = _decode_metadata(_read(fh, meta_length, "metadata"))
        records = _read_records(fh)

    for key in ("profile", "variant"):
        if key not in meta:
            raise MissingKeyError(f"checkpoint metadata lacks '{key}'")
    profile, variant = meta.pop("profile"), meta.pop("variant")
    if expected_profile is not None and profile != expected_profile:
        raise ProfileMismatchError(f"checkpoint was trained with the '{profile}' profile, "
                                   f"this run uses '{expected_profile}'")

    tensors = {k: v for k, v in records.items() if not k.startswith("optim.")}
    _check_tensors(tensors, profile, variant)

    optimizer = None
    if "optim.step" in meta:
        optimizer = AdamState(
            lr=float(meta.pop("optim.lr")),
            beta1=float(meta.pop("optim.beta1")),
            beta2=float(meta.pop("optim.beta2")),
            epsilon=float(meta.pop("optim.epsilon")),
            step=int(meta.pop("optim.step")),
            m={k[len(_M_PREFIX):]: v for k, v in records.items() if k.startswith(_M_PREFIX)},
            v={k[len(_V_PREFIX):]: v for k, v in records.items() if k.startswith(_V_PREFIX)},
        )

    curve = meta.pop("loss_curve", "")
    return Checkpoint(
        profile=profile,
        variant=variant,
        tensors=tensors,
        epoch=int(meta.pop("epoch", "0")),
        seed=int(meta.pop("seed", "0")),
        loss_curve=[float(v) for v in curve.split(",")] if curve else [],
        optimizer=optimizer,
        extra=meta,
        version=version,
    )


def checkpoint_from_network(network: DiameterNetwork, **kwargs) -> Checkpoint:
    """Snapshot the current parameter values (copied) of a network."""
    tensors = {key: param.value.copy() for key, param in network.parameters().items()}
    return Checkpoint(profile=network.profile, variant=network.variant, tensors=tensors, **kwargs)


def network_from_checkpoint(checkpoint: Checkpoint, dtype: Optional[type] = None) -> DiameterNetwork:
    network = DiameterNetwork(build_profile(checkpoint.profile, checkpoint.variant),
                              seed=checkpoint.seed, dtype=dtype)
    _check_tensors(checkpoint.tensors, checkpoint.profile, checkpoint.variant)
    network.load_state(checkpoint.tensors)
    return network
