# models/cgru.py
"""Convolutional gated recurrent unit.

    r = sigmoid(W_hr * h_prev + W_xr * x + b_r)
    z = sigmoid(W_hz * h_prev + W_xz * x + b_z)
    h = (1 - z) . h_prev + z . tanh(W_h * (r . h_prev) + W_x * x + b)

``*`` is a 3x3, stride 1, padding 1 cross-correlation with full channel mixing
and ``.`` is the elementwise product.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from exceptions import EmptyInputError, MissingForwardStateError, ShapeError
from tensors import (
    ConvSpec,
    Param,
    activation,
    activation_backward,
    conv2d,
    conv2d_backward,
    conv2d_shared,
    conv2d_shared_backward,
    elementwise,
    elementwise_backward,
    get_default_dtype,
    kaiming_uniform,
    zeros,
)
from .encoder import FeatureMap

logger = logging.getLogger(__name__)

KERNELS = ("W_hr", "W_xr", "W_hz", "W_xz", "W_h", "W_x")
BIASES = ("b_r", "b_z", "b")


@dataclass
class CGruWeights:
    W_hr: Param
    W_xr: Param
    W_hz: Param
    W_xz: Param
    W_h: Param
    W_x: Param
    b_r: Param
    b_z: Param
    b: Param

    def __post_init__(self):
        channels = self.b.shape[0]
        for name in KERNELS:
            if getattr(self, name).shape != (channels, channels, 3, 3):
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected ({channels}, {channels}, 3, 3)")
        for name in BIASES:
            if getattr(self, name).shape != (channels,):
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected ({channels},)")

    @property
    def channels(self) -> int:
        return self.b.shape[0]

    @property
    def spec(self) -> ConvSpec:
        return ConvSpec(self.channels, self.channels, (3, 3), (1, 1), (1, 1))

    @classmethod
    def init(cls, channels: int, rng: Optional[np.random.Generator] = None,
             dtype: Optional[type] = None, prefix: str = "cgru") -> "CGruWeights":
        """Kaiming-uniform kernels, zero biases."""
        rng = rng if rng is not None else np.random.default_rng(0)
        dtype = dtype or get_default_dtype()
        fan_in = channels * 9
        params = {name: Param(kaiming_uniform((channels, channels, 3, 3), fan_in, rng, dtype), name=f"{prefix}.{name}")
                  for name in KERNELS}
        params.update({name: Param(zeros((channels,), dtype), name=f"{prefix}.{name}") for name in BIASES})
        return cls(**params)

    @classmethod
    def constant(cls, channels: int, kernel: float = 0.0, dtype: Optional[type] = None,
                 prefix: str = "cgru", **overrides: float) -> "CGruWeights":
        """Every kernel filled with ``kernel`` and every bias with 0, unless overridden by name."""
        dtype = dtype or get_default_dtype()
        params = {}
        for name in KERNELS:
            params[name] = Param(np.full((channels, channels, 3, 3), overrides.get(name, kernel), dtype=dtype),
                                 name=f"{prefix}.{name}")
        for name in BIASES:
            params[name] = Param(np.full((channels,), overrides.get(name, 0.0), dtype=dtype), name=f"{prefix}.{name}")
        return cls(**params)

    def parameters(self) -> Dict[str, Param]:
        return {getattr(self, name).name: getattr(self, name) for name in KERNELS + BIASES}


@dataclass
class CGruState:
    h: np.ndarray
    t: int = 0


@dataclass
class GateActivations:
    r: np.ndarray
    z: np.ndarray


def _check(h_prev: CGruState, x: FeatureMap, w: CGruWeights) -> None:
    if h_prev.h.shape != x.x.shape:
        raise ShapeError(f"state shape {h_prev.h.shape} != feature map shape {x.x.shape}")
    if x.x.shape[0] != w.channels:
        raise ShapeError(f"feature map has {x.x.shape[0]} channels, weights expect {w.channels}", axis=0)


def _conv_terms(h: np.ndarray, x: np.ndarray, w: CGruWeights, spec: ConvSpec):
    """All convolutions of h_prev and x for one step, with a single im2col per input."""
    (xr, xz, xc), x_cache = conv2d_shared(x, (w.W_xr, w.W_xz, w.W_x), (w.b_r, w.b_z, w.b), spec)
    (hr, hz), h_cache = conv2d_shared(h, (w.W_hr, w.W_hz), (None, None), spec)
    return (hr, hz, xr, xz, xc), (h_cache, x_cache)


def _gate(from_h: np.ndarray, from_x: np.ndarray):
    pre, add_cache = elementwise(from_h, from_x, "add")
    out, act_cache = activation(pre, "sigmoid")
    return out, (add_cache, act_cache)


def _gate_backward(dout: np.ndarray, cache):
    add_cache, act_cache = cache
    return elementwise_backward(activation_backward(dout, act_cache), add_cache)


def gates(h_prev: CGruState, x: FeatureMap, w: CGruWeights) -> GateActivations:
    _check(h_prev, x, w)
    (hr, hz, xr, xz, _), _ = _conv_terms(h_prev.h, x.x, w, w.spec)
    r, _ = _gate(hr, xr)
    z, _ = _gate(hz, xz)
    return GateActivations(r=r, z=z)


def _step_forward(h_prev: CGruState, x: FeatureMap, w: CGruWeights):
    _check(h_prev, x, w)
    spec = w.spec
    h = h_prev.h
    (hr, hz, xr, xz, xc), (h_cache, x_cache) = _conv_terms(h, x.x, w, spec)
    r, r_cache = _gate(hr, xr)
    z, z_cache = _gate(hz, xz)
    rh, rh_cache = elementwise(r, h, "mul")
    from_h, cand_h_cache = conv2d(rh, w.W_h, None, spec)
    pre, pre_cache = elementwise(from_h, xc, "add")
    candidate, tanh_cache = activation(pre, "tanh")
    h_new, blend_cache = elementwise(z, h, "one_minus_a_times_b_plus", candidate)
    cache = (h_cache, x_cache, r_cache, z_cache, rh_cache, cand_h_cache, pre_cache, tanh_cache, blend_cache)
    return CGruState(h=h_new, t=h_prev.t + 1), cache


def _step_backward(dh: np.ndarray, cache):
    """Returns (grad wrt h_prev, grad wrt x) and accumulates weight grads."""
    h_cache, x_cache, r_cache, z_cache, rh_cache, cand_h_cache, pre_cache, tanh_cache, blend_cache = cache
    dz, dh_prev, dcandidate = elementwise_backward(dh, blend_cache)
    dpre = activation_backward(dcandidate, tanh_cache)
    d_from_h, dxc = elementwise_backward(dpre, pre_cache)
    drh = conv2d_backward(d_from_h, cand_h_cache)
    dr, dh_from_rh = elementwise_backward(drh, rh_cache)
    dhz, dxz = _gate_backward(dz, z_cache)
    dhr, dxr = _gate_backward(dr, r_cache)
    dh_gates = conv2d_shared_backward((dhr, dhz), h_cache)
    dx = conv2d_shared_backward((dxr, dxz, dxc), x_cache)
    return dh_prev + dh_from_rh + dh_gates, dx


def step(h_prev: CGruState, x: FeatureMap, w: CGruWeights) -> CGruState:
    state, _ = _step_forward(h_prev, x, w)
    return state


def zero_state(shape, dtype: Optional[type] = None) -> CGruState:
    return CGruState(h=zeros(tuple(shape), dtype), t=0)


class ConvGRU:
    """Unrolls the recurrence over a sequence and runs full BPTT."""

    def __init__(self, weights: CGruWeights):
        self.weights = weights
        self._caches: Optional[List] = None

    def parameters(self) -> Dict[str, Param]:
        return self.weights.parameters()

    def step(self, h_prev: CGruState, x: FeatureMap) -> CGruState:
        return step(h_prev, x, self.weights)

    def unroll(self, features: Sequence[FeatureMap], h0: Optional[CGruState] = None,
               train: bool = False) -> List[CGruState]:
        if len(features) == 0:
            raise EmptyInputError("cannot unroll an empty sequence")
        state = h0 if h0 is not None else zero_state(features[0].x.shape, features[0].x.dtype)
        states, caches = [], []
        for x in features:
            state, cache = _step_forward(state, x, self.weights)
            states.append(state)
            if train:
                caches.append(cache)
        self._caches = caches if train else None
        return states

    def bptt(self, upstream: Sequence[np.ndarray]) -> List[np.ndarray]:
        """Gradients wrt every x[t] given dLoss/dh[t] from the head at each t."""
        if not self._caches:
            raise MissingForwardStateError("bptt needs a preceding unroll(train=True)")
        if len(upstream) != len(self._caches):
            raise ShapeError(f"{len(upstream)} upstream gradients for {len(self._caches)} unrolled steps")
        caches, self._caches = self._caches, None
        dx = [None] * len(caches)
        carry = np.zeros_like(upstream[-1])
        for t in range(len(caches) - 1, -1, -1):
            carry, dx[t] = _step_backward(upstream[t] + carry, caches[t])
        return dx

    def clear(self) -> None:
        self._caches = None
