# tensors/tensor.py
import struct
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import BinaryIO, Iterator, Optional, Tuple

import numpy as np

import config
from exceptions import NumericalError, ShapeError, TruncatedPayloadError

_DTYPES = {"float32": np.float32, "float64": np.float64}
_default_dtype = _DTYPES[config.NUMERIC_CONFIG["dtype"]]


def get_default_dtype() -> type:
    return _default_dtype


def set_default_dtype(name: str) -> None:
    global _default_dtype
    if name not in _DTYPES:
        raise ValueError(f"unsupported dtype {name!r}")
    _default_dtype = _DTYPES[name]


@contextmanager
def precision(name: str) -> Iterator[None]:
    """Temporarily switch the dtype used for new parameters and frames."""
    previous = _default_dtype
    set_default_dtype(name)
    try:
        yield
    finally:
        set_default_dtype(np.dtype(previous).name)


@dataclass
class Param:
    """A trainable tensor and its gradient accumulator."""

    value: np.ndarray
    grad: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        elif self.grad.shape != self.value.shape:
            raise ShapeError(f"grad shape {self.grad.shape} != value shape {self.value.shape} for '{self.name}'")

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        if g.shape != self.value.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {self.value.shape} for '{self.name}'")
        self.grad += g

    def zero_grad(self) -> None:
        self.grad.fill(0)


def kaiming_uniform(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator,
                    dtype: Optional[type] = None) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype or _default_dtype)


def zeros(shape: Tuple[int, ...], dtype: Optional[type] = None) -> np.ndarray:
    return np.zeros(shape, dtype=dtype or _default_dtype)


def assert_finite(x: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite values produced by {where}")


# --- serialization: [u32 rank][u64 extents...][f32 payload], little-endian ---

def tensor_to_bytes(x: np.ndarray) -> bytes:
    header = struct.pack("<I", x.ndim) + struct.pack(f"<{x.ndim}Q", *x.shape)
    return header + np.ascontiguousarray(x, dtype="<f4").tobytes()


def write_tensor(fh: BinaryIO, x: np.ndarray) -> int:
    blob = tensor_to_bytes(x)
    fh.write(blob)
    return len(blob)


def _read_exact(fh: BinaryIO, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise TruncatedPayloadError(f"expected {n} bytes for {what}, got {len(data)}")
    return data


def read_tensor(fh: BinaryIO, dtype: Optional[type] = None) -> np.ndarray:
    (rank,) = struct.unpack("<I", _read_exact(fh, 4, "tensor rank"))
    shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "tensor extents"))
    count = int(np.prod(shape, dtype=np.int64))
    payload = _read_exact(fh, 4 * count, f"tensor payload of shape {shape}")
    x = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return x.astype(dtype or _default_dtype)
