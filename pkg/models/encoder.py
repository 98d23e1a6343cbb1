# models/encoder.py
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from exceptions import ConfigError, DataFormatError, MissingForwardStateError, ShapeError
from tensors import (
    ConvSpec,
    Param,
    activation,
    activation_backward,
    conv2d,
    conv2d_backward,
    get_default_dtype,
    kaiming_uniform,
    max_pool2d,
    max_pool2d_backward,
    pool_output_extent,
    zeros,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncoderLayer:
    conv: ConvSpec
    activation: str = "relu"
    # (window, stride) applied after the activation
    pool: Optional[Tuple[int, int]] = None


@dataclass(frozen=True)
class EncoderConfig:
    """Layer stack of the per-frame feature extractor.

    The layer shape algebra is composed at construction time; when
    ``declared_output`` is given the composed shape must match it exactly.
    """

    input_extent: int
    layers: Tuple[EncoderLayer, ...]
    declared_output: Optional[Tuple[int, int, int]] = None
    shapes: Tuple[Tuple[int, int, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("encoder needs at least one layer")
        channels, h, w = 1, self.input_extent, self.input_extent
        shapes = []
        for index, layer in enumerate(self.layers):
            if layer.conv.in_channels != channels:
                raise ConfigError(
                    f"layer {index + 1} expects {layer.conv.in_channels} input channels, previous layer gives {channels}"
                )
            channels, h, w = layer.conv.output_shape(h, w)
            if layer.pool is not None:
                window, stride = layer.pool
                h, w = pool_output_extent(h, window, stride), pool_output_extent(w, window, stride)
                if h < 1 or w < 1:
                    raise ConfigError(f"pool after layer {index + 1} leaves an empty feature map")
            shapes.append((channels, h, w))
        object.__setattr__(self, "shapes", tuple(shapes))
        if self.declared_output is not None and tuple(self.declared_output) != shapes[-1]:
            raise ConfigError(f"encoder maps {self.input_extent}x{self.input_extent} to {shapes[-1]}, "
                              f"declared {self.declared_output}")

    @property
    def output_shape(self) -> Tuple[int, int, int]:
        return self.shapes[-1]

    @property
    def channels(self) -> int:
        return self.shapes[-1][0]

    @classmethod
    def full(cls) -> "EncoderConfig":
        """AlexNet-style stack mapping 1x128x128 to 256x13x13."""
        return cls(
            input_extent=128,
            layers=(
                EncoderLayer(ConvSpec(1, 64, (11, 11), (4, 4), (5, 5)), pool=(3, 2)),
                EncoderLayer(ConvSpec(64, 192, (5, 5), (1, 1), (2, 2))),
                EncoderLayer(ConvSpec(192, 384, (3, 3), (1, 1), (1, 1))),
                EncoderLayer(ConvSpec(384, 256, (3, 3), (1, 1), (1, 1))),
                EncoderLayer(ConvSpec(256, 256, (3, 3), (1, 1), (0, 0))),
            ),
            declared_output=(256, 13, 13),
        )

    @classmethod
    def test(cls) -> "EncoderConfig":
        """Small stack mapping 1x64x64 to 32x6x6."""
        return cls(
            input_extent=64,
            layers=(
                EncoderLayer(ConvSpec(1, 16, (5, 5), (2, 2), (2, 2)), pool=(2, 2)),
                EncoderLayer(ConvSpec(16, 32, (3, 3), (1, 1), (1, 1)), pool=(2, 2)),
                EncoderLayer(ConvSpec(32, 32, (3, 3), (1, 1), (0, 0))),
            ),
            declared_output=(32, 6, 6),
        )


@dataclass
class FeatureMap:
    x: np.ndarray
    frame_index: int = 0


class Encoder:
    """Per-frame convolutional feature extractor.

    In training mode every forward pass pushes its intermediates onto a stack;
    ``encode_backward`` pops the most recent one, so frames are released in
    reverse time order, matching backpropagation through time.
    """

    def __init__(self, config: EncoderConfig, rng: Optional[np.random.Generator] = None,
                 dtype: Optional[type] = None, prefix: str = "encoder"):
        self.config = config
        self.prefix = prefix
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = dtype or get_default_dtype()
        self.weights: List[Param] = []
        self.biases: List[Param] = []
        for index, layer in enumerate(config.layers, start=1):
            spec = layer.conv
            fan_in = spec.in_channels * spec.kernel[0] * spec.kernel[1]
            self.weights.append(Param(kaiming_uniform(spec.weight_shape, fan_in, rng, dtype),
                                      name=f"{prefix}.conv{index}.weight"))
            self.biases.append(Param(zeros((spec.out_channels,), dtype), name=f"{prefix}.conv{index}.bias"))
        self._retained: List[list] = []

    def parameters(self) -> Dict[str, Param]:
        params = {}
        for w, b in zip(self.weights, self.biases):
            params[w.name] = w
            params[b.name] = b
        return params

    def encode_frame(self, frame: np.ndarray, frame_index: int = 0, train: bool = False) -> FeatureMap:
        extent = self.config.input_extent
        if frame.shape != (1, extent, extent):
            raise ShapeError(f"frame shape {frame.shape} does not match encoder input (1, {extent}, {extent})")
        if frame.size and (frame.min() < 0 or frame.max() > 1):
            raise DataFormatError(f"frame {frame_index} pixel values outside [0, 1]")
        x = frame
        caches = []
        for layer, w, b in zip(self.config.layers, self.weights, self.biases):
            x, conv_cache = conv2d(x, w, b, layer.conv)
            x, act_cache = activation(x, layer.activation)
            pool_cache = None
            if layer.pool is not None:
                window, stride = layer.pool
                x, pool_cache = max_pool2d(x, (window, window), (stride, stride))
            caches.append((conv_cache, act_cache, pool_cache))
        if train:
            self._retained.append(caches)
        return FeatureMap(x=x, frame_index=frame_index)

    def encode_backward(self, upstream: np.ndarray) -> np.ndarray:
        if not self._retained:
            raise MissingForwardStateError("encode_backward called without a retained training forward pass")
        if upstream.shape != self.config.output_shape:
            raise ShapeError(f"upstream gradient {upstream.shape} != encoder output {self.config.output_shape}")
        caches = self._retained.pop()
        grad = upstream
        for conv_cache, act_cache, pool_cache in reversed(caches):
            if pool_cache is not None:
                grad = max_pool2d_backward(grad, pool_cache)
            grad = activation_backward(grad, act_cache)
            grad = conv2d_backward(grad, conv_cache)
        return grad

    def clear(self) -> None:
        self._retained.clear()

    @property
    def retained(self) -> int:
        return len(self._retained)
