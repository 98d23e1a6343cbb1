# models/head.py
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from exceptions import ConfigError, MissingForwardStateError, ShapeError
from tensors import (
    Param,
    activation,
    activation_backward,
    dense,
    dense_backward,
    flatten,
    flatten_backward,
    get_default_dtype,
    kaiming_uniform,
    zeros,
)
from .cgru import CGruState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeadConfig:
    widths: Tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ConfigError("head needs an input width and at least one layer")
        if self.widths[-1] != 1:
            raise ConfigError(f"head must end in a single output, got width {self.widths[-1]}")
        if min(self.widths) < 1:
            raise ConfigError(f"head widths must be positive, got {self.widths}")

    @property
    def input_width(self) -> int:
        return self.widths[0]

    @classmethod
    def full(cls, input_width: int = 256 * 13 * 13) -> "HeadConfig":
        return cls(widths=(input_width, 512, 64, 1))

    @classmethod
    def test(cls, input_width: int = 32 * 6 * 6) -> "HeadConfig":
        return cls(widths=(input_width, 32, 1))


class RegressionHead:
    """Fully connected stack reducing a flattened state to a diameter in mm."""

    def __init__(self, config: HeadConfig, rng: Optional[np.random.Generator] = None,
                 dtype: Optional[type] = None, prefix: str = "head"):
        self.config = config
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = dtype or get_default_dtype()
        self.weights: List[Param] = []
        self.biases: List[Param] = []
        widths = config.widths
        for index, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
            self.weights.append(Param(kaiming_uniform((n_out, n_in), n_in, rng, dtype),
                                      name=f"{prefix}.fc{index}.weight"))
            self.biases.append(Param(zeros((n_out,), dtype), name=f"{prefix}.fc{index}.bias"))
        self._retained: List[list] = []

    def parameters(self) -> Dict[str, Param]:
        params = {}
        for w, b in zip(self.weights, self.biases):
            params[w.name] = w
            params[b.name] = b
        return params

    def predict(self, h: Union[CGruState, np.ndarray], train: bool = False) -> float:
        state = h.h if isinstance(h, CGruState) else h
        x, shape = flatten(state)
        if x.shape[0] != self.config.input_width:
            raise ShapeError(f"flattened state has {x.shape[0]} values, head expects {self.config.input_width}")
        caches = [shape]
        last = len(self.weights) - 1
        for index, (w, b) in enumerate(zip(self.weights, self.biases)):
            x, dense_cache = dense(x, w, b)
            act_cache = None
            if index < last:
                x, act_cache = activation(x, self.config.activation)
            caches.append((dense_cache, act_cache))
        if train:
            self._retained.append(caches)
        return float(x[0])

    def head_backward(self, upstream: float) -> np.ndarray:
        """Gradient wrt the state for dLoss/dy_hat = upstream."""
        if not self._retained:
            raise MissingForwardStateError("head_backward called without a retained training forward pass")
        caches = self._retained.pop()
        shape, layers = caches[0], caches[1:]
        dtype = self.weights[0].value.dtype
        grad = np.array([upstream], dtype=dtype)
        for dense_cache, act_cache in reversed(layers):
            if act_cache is not None:
                grad = activation_backward(grad, act_cache)
            grad = dense_backward(grad, dense_cache)
        return flatten_backward(grad, shape)

    def clear(self) -> None:
        self._retained.clear()
