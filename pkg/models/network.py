# models/network.py
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

import config
from exceptions import ConfigError, EmptyInputError, MissingForwardStateError, ShapeError
from tensors import Param, get_default_dtype
from .cgru import BIASES, KERNELS, CGruState, CGruWeights, ConvGRU, zero_state
from .encoder import Encoder, EncoderConfig, FeatureMap
from .head import HeadConfig, RegressionHead

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    profile: str
    variant: str
    encoder: EncoderConfig
    head: HeadConfig

    def __post_init__(self):
        if self.variant not in config.VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}, expected one of {config.VARIANTS}")
        channels, n_x, m_x = self.encoder.output_shape
        if self.head.input_width != channels * n_x * m_x:
            raise ConfigError(f"head input width {self.head.input_width} != flattened encoder output "
                              f"{channels * n_x * m_x}")

    @property
    def frame_extent(self) -> int:
        return self.encoder.input_extent

    @property
    def recurrent(self) -> bool:
        return self.variant == "cgru"


def build_profile(profile: str, variant: str = "cgru") -> ModelConfig:
    """Layer shapes for a named model-size profile."""
    if profile == "full":
        encoder = EncoderConfig.full()
        head = HeadConfig.full(int(np.prod(encoder.output_shape)))
    elif profile == "test":
        encoder = EncoderConfig.test()
        head = HeadConfig.test(int(np.prod(encoder.output_shape)))
    else:
        raise ConfigError(f"unknown profile {profile!r}, expected one of {config.PROFILES}")
    return ModelConfig(profile=profile, variant=variant, encoder=encoder, head=head)


class DiameterNetwork:
    """Frame encoder, optional convolutional GRU and regression head.

    The ``framewise`` variant feeds each feature map straight to the head;
    the ``cgru`` variant feeds the recurrent state h[t].
    """

    def __init__(self, model_config: ModelConfig, seed: int = 0, dtype: Optional[type] = None):
        self.config = model_config
        dtype = dtype or get_default_dtype()
        rng = np.random.default_rng(seed)
        self.encoder = Encoder(model_config.encoder, rng=rng, dtype=dtype)
        self.cgru: Optional[ConvGRU] = None
        if model_config.recurrent:
            self.cgru = ConvGRU(CGruWeights.init(model_config.encoder.channels, rng=rng, dtype=dtype))
        self.head = RegressionHead(model_config.head, rng=rng, dtype=dtype)
        self._stream_state: Optional[CGruState] = None
        self._stream_index = 0
        self._frames_in_flight = 0

    @property
    def profile(self) -> str:
        return self.config.profile

    @property
    def variant(self) -> str:
        return self.config.variant

    def parameters(self) -> Dict[str, Param]:
        params = dict(self.encoder.parameters())
        if self.cgru is not None:
            params.update(self.cgru.parameters())
        params.update(self.head.parameters())
        return params

    def zero_grad(self) -> None:
        for param in self.parameters().values():
            param.zero_grad()

    def load_state(self, tensors: Dict[str, np.ndarray]) -> None:
        """Copy stored values into the parameters; keys and shapes must already be checked."""
        for key, param in self.parameters().items():
            param.value[...] = tensors[key]

    # --- whole-sequence paths ---

    def forward_sequence(self, frames: np.ndarray, train: bool = False) -> np.ndarray:
        """Diameter estimate for every frame of a K x 1 x N x M stack."""
        if len(frames) == 0:
            raise EmptyInputError("cannot run the network on an empty sequence")
        features = [self.encoder.encode_frame(frame, frame_index=t + 1, train=train)
                    for t, frame in enumerate(frames)]
        if self.cgru is not None:
            inputs = self.cgru.unroll(features, train=train)
        else:
            inputs = [feature.x for feature in features]
        y_hat = np.array([self.head.predict(h, train=train) for h in inputs])
        self._frames_in_flight = len(frames) if train else 0
        return y_hat

    def backward_sequence(self, grad_y_hat: np.ndarray) -> None:
        """Backpropagate dLoss/dy_hat through head, recurrence and encoder."""
        if self._frames_in_flight == 0:
            raise MissingForwardStateError("backward_sequence needs a preceding forward_sequence(train=True)")
        if len(grad_y_hat) != self._frames_in_flight:
            raise ShapeError(f"{len(grad_y_hat)} output gradients for {self._frames_in_flight} frames")
        count, self._frames_in_flight = self._frames_in_flight, 0
        # caches are stacks: release them from the last frame backwards
        grad_states = [None] * count
        for t in range(count - 1, -1, -1):
            grad_states[t] = self.head.head_backward(float(grad_y_hat[t]))
        grad_features = self.cgru.bptt(grad_states) if self.cgru is not None else grad_states
        for t in range(count - 1, -1, -1):
            self.encoder.encode_backward(grad_features[t])

    def predict_sequence(self, frames: np.ndarray) -> np.ndarray:
        return self.forward_sequence(frames, train=False)

    # --- causal streaming ---

    def reset_stream(self) -> None:
        self._stream_state = None
        self._stream_index = 0

    def encode(self, frame: np.ndarray) -> FeatureMap:
        self._stream_index += 1
        return self.encoder.encode_frame(frame, frame_index=self._stream_index)

    def advance(self, feature: FeatureMap) -> np.ndarray:
        """Carry the recurrent state one frame forward; identity for the frame-wise variant."""
        if self.cgru is None:
            return feature.x
        if self._stream_state is None:
            self._stream_state = zero_state(feature.x.shape, feature.x.dtype)
        self._stream_state = self.cgru.step(self._stream_state, feature)
        return self._stream_state.h

    def predict_next(self, frame: np.ndarray) -> float:
        return self.head.predict(self.advance(self.encode(frame)))

    def stream(self, frames: Iterable[np.ndarray]) -> Iterator[float]:
        """Yield y_hat[t] as soon as frame t has been consumed."""
        self.reset_stream()
        for frame in frames:
            yield self.predict_next(frame)

    def clear(self) -> None:
        self.encoder.clear()
        self.head.clear()
        if self.cgru is not None:
            self.cgru.clear()
        self._frames_in_flight = 0


def expected_shapes(profile: str, variant: str = "cgru") -> Dict[str, Tuple[int, ...]]:
    """Parameter key -> shape for a profile/variant, in parameter order."""
    model_config = build_profile(profile, variant)
    shapes: Dict[str, Tuple[int, ...]] = {}
    for i, layer in enumerate(model_config.encoder.layers, start=1):
        shapes[f"encoder.conv{i}.weight"] = layer.conv.weight_shape
        shapes[f"encoder.conv{i}.bias"] = (layer.conv.out_channels,)
    if model_config.recurrent:
        channels = model_config.encoder.channels
        for name in KERNELS:
            shapes[f"cgru.{name}"] = (channels, channels, 3, 3)
        for name in BIASES:
            shapes[f"cgru.{name}"] = (channels,)
    widths = model_config.head.widths
    for i, (n_in, n_out) in enumerate(zip(widths[:-1], widths[1:]), start=1):
        shapes[f"head.fc{i}.weight"] = (n_out, n_in)
        shapes[f"head.fc{i}.bias"] = (n_out,)
    return shapes


def expected_keys(profile: str, variant: str = "cgru") -> List[str]:
    """Parameter keys a checkpoint of this profile/variant must contain."""
    return list(expected_shapes(profile, variant))
