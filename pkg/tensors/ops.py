# tensors/ops.py
"""Differentiable layer primitives.

Every forward function returns ``(out, cache)``; the matching ``*_backward``
takes the upstream gradient and that cache, accumulates parameter gradients
into the ``Param`` objects it was given and returns the gradient(s) with
respect to its input(s). There is no tape: callers keep the caches.
"""
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from exceptions import DegenerateOutputError, ShapeError
from .tensor import Param

ACTIVATIONS = ("sigmoid", "tanh", "relu")
ELEMENTWISE = ("add", "mul", "one_minus_a_times_b_plus")


@dataclass(frozen=True)
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: Tuple[int, int]
    stride: Tuple[int, int] = (1, 1)
    padding: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError(f"channel counts must be positive, got {self.in_channels}->{self.out_channels}")
        if min(self.kernel) < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ShapeError(f"invalid kernel/stride/padding {self.kernel}/{self.stride}/{self.padding}")

    @property
    def weight_shape(self) -> Tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels) + tuple(self.kernel)

    def output_extent(self, extent: int, axis: int) -> int:
        k, s, p = self.kernel[axis], self.stride[axis], self.padding[axis]
        return (extent + 2 * p - k) // s + 1

    def output_shape(self, height: int, width: int) -> Tuple[int, int, int]:
        out_h = self.output_extent(height, 0)
        out_w = self.output_extent(width, 1)
        if out_h < 1 or out_w < 1:
            raise DegenerateOutputError(
                f"conv {self.kernel} stride {self.stride} pad {self.padding} on {height}x{width} "
                f"gives {out_h}x{out_w}"
            )
        return self.out_channels, out_h, out_w


def pool_output_extent(extent: int, window: int, stride: int) -> int:
    return (extent - window) // stride + 1


# --- convolution (cross-correlation, zero padding) ---

def _check_conv_params(weights: Param, bias: Optional[Param], spec: ConvSpec) -> None:
    if weights.shape != spec.weight_shape:
        raise ShapeError(f"weights {weights.shape} do not match spec {spec.weight_shape}")
    if bias is not None and bias.shape != (spec.out_channels,):
        raise ShapeError(f"bias {bias.shape} does not match {spec.out_channels} output channels")


def _im2col(x: np.ndarray, spec: ConvSpec):
    if x.ndim != 3:
        raise ShapeError(f"conv2d expects a C x H x W tensor, got rank {x.ndim}")
    if x.shape[0] != spec.in_channels:
        raise ShapeError(f"input has {x.shape[0]} channels, spec expects {spec.in_channels}", axis=0)
    _, out_h, out_w = spec.output_shape(x.shape[1], x.shape[2])
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw))) if (ph or pw) else x
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw][:, :out_h, :out_w]
    # (H'W', C*kh*kw); reshape copies the overlapping windows once
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(out_h * out_w, -1)
    return cols, xp.shape, (out_h, out_w)


def _col2im(dcols: np.ndarray, x_shape, xp_shape, out_hw, spec: ConvSpec) -> np.ndarray:
    (kh, kw), (sh, sw), (ph, pw) = spec.kernel, spec.stride, spec.padding
    out_h, out_w = out_hw
    dcols = dcols.reshape(out_h, out_w, x_shape[0], kh, kw)
    dxp = np.zeros(xp_shape, dtype=dcols.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + sh * out_h:sh, j:j + sw * out_w:sw] += dcols[:, :, :, i, j].transpose(2, 0, 1)
    if ph or pw:
        dxp = dxp[:, ph:ph + x_shape[1], pw:pw + x_shape[2]]
    return dxp


def conv2d_shared(x: np.ndarray, weights: Sequence[Param], biases: Sequence[Optional[Param]],
                  spec: ConvSpec) -> Tuple[List[np.ndarray], Any]:
    """Several kernels of the same spec applied to one input, building its im2col matrix once."""
    if len(weights) == 0 or len(weights) != len(biases):
        raise ShapeError(f"{len(weights)} kernels for {len(biases)} biases")
    for w, b in zip(weights, biases):
        _check_conv_params(w, b, spec)
    cols, xp_shape, (out_h, out_w) = _im2col(x, spec)
    outs = []
    for w, b in zip(weights, biases):
        out = cols @ w.value.reshape(spec.out_channels, -1).T
        if b is not None:
            out += b.value
        outs.append(np.ascontiguousarray(out.T).reshape(spec.out_channels, out_h, out_w))
    return outs, (cols, x.shape, xp_shape, (out_h, out_w), tuple(weights), tuple(biases), spec)


def conv2d_shared_backward(douts: Sequence[np.ndarray], cache: Any) -> np.ndarray:
    """Accumulates every kernel's gradient; returns the summed gradient wrt the shared input."""
    cols, x_shape, xp_shape, out_hw, weights, biases, spec = cache
    if len(douts) != len(weights):
        raise ShapeError(f"{len(douts)} upstream gradients for {len(weights)} kernels")
    dcols = None
    for dout, w, b in zip(douts, weights, biases):
        d2 = dout.reshape(spec.out_channels, -1)
        w.accumulate((d2 @ cols).reshape(w.shape))
        if b is not None:
            b.accumulate(d2.sum(axis=1))
        part = d2.T @ w.value.reshape(spec.out_channels, -1)
        dcols = part if dcols is None else dcols + part
    return _col2im(dcols, x_shape, xp_shape, out_hw, spec)


def conv2d(x: np.ndarray, weights: Param, bias: Optional[Param], spec: ConvSpec) -> Tuple[np.ndarray, Any]:
    """im2col cross-correlation of a C_in x H x W tensor."""
    outs, cache = conv2d_shared(x, (weights,), (bias,), spec)
    return outs[0], cache


def conv2d_backward(dout: np.ndarray, cache: Any) -> np.ndarray:
    return conv2d_shared_backward((dout,), cache)


# --- max pooling ---

def max_pool2d(x: np.ndarray, window: Tuple[int, int], stride: Tuple[int, int]) -> Tuple[np.ndarray, Any]:
    kh, kw = window
    sh, sw = stride
    c, h, w = x.shape
    if kh > h or kw > w:
        raise ShapeError(f"pool window {window} larger than input {h}x{w}")
    out_h = pool_output_extent(h, kh, sh)
    out_w = pool_output_extent(w, kw, sw)
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::sh, ::sw][:, :out_h, :out_w]
    flat = windows.reshape(c, out_h, out_w, kh * kw)
    # argmax returns the first maximum in row-major window order
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape, window, stride)


def max_pool2d_backward(dout: np.ndarray, cache: Any) -> np.ndarray:
    arg, x_shape, (kh, kw), (sh, sw) = cache
    c, out_h, out_w = arg.shape
    ch, oi, oj = np.indices((c, out_h, out_w))
    rows = oi * sh + arg // kw
    cols = oj * sw + arg % kw
    dx = np.zeros(x_shape, dtype=dout.dtype)
    np.add.at(dx, (ch, rows, cols), dout)
    return dx


# --- fully connected ---

def dense(x: np.ndarray, weights: Param, bias: Param) -> Tuple[np.ndarray, Any]:
    if x.ndim != 1:
        raise ShapeError(f"dense expects a vector, got shape {x.shape}")
    if weights.value.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ShapeError(f"weights {weights.shape} do not accept input of length {x.shape[0]}", axis=1)
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"bias {bias.shape} does not match {weights.shape[0]} outputs", axis=0)
    out = weights.value @ x + bias.value
    return out, (x, weights, bias)


def dense_backward(dout: np.ndarray, cache: Any) -> np.ndarray:
    x, weights, bias = cache
    weights.accumulate(np.outer(dout, x))
    bias.accumulate(dout)
    return weights.value.T @ dout


# --- activations ---

def activation(x: np.ndarray, kind: str) -> Tuple[np.ndarray, Any]:
    if kind == "sigmoid":
        out = expit(x)
    elif kind == "tanh":
        out = np.tanh(x)
    elif kind == "relu":
        out = np.maximum(x, 0)
    else:
        raise ValueError(f"unknown activation {kind!r}, expected one of {ACTIVATIONS}")
    return out, (kind, x, out)


def activation_backward(dout: np.ndarray, cache: Any) -> np.ndarray:
    kind, x, out = cache
    if kind == "sigmoid":
        return dout * out * (1 - out)
    if kind == "tanh":
        return dout * (1 - out * out)
    return dout * (x > 0)


# --- elementwise (no broadcasting) ---

def elementwise(a: np.ndarray, b: np.ndarray, kind: str, c: Optional[np.ndarray] = None) -> Tuple[np.ndarray, Any]:
    """add: a+b; mul: a*b; one_minus_a_times_b_plus: (1-a)*b + a*c (gated blend)."""
    if a.shape != b.shape:
        raise ShapeError(f"elementwise {kind}: shapes {a.shape} and {b.shape} differ")
    if kind == "add":
        out = a + b
    elif kind == "mul":
        out = a * b
    elif kind == "one_minus_a_times_b_plus":
        if c is None or c.shape != a.shape:
            raise ShapeError(f"gated blend needs a third operand of shape {a.shape}")
        out = (1 - a) * b + a * c
    else:
        raise ValueError(f"unknown elementwise op {kind!r}, expected one of {ELEMENTWISE}")
    return out, (kind, a, b, c)


def elementwise_backward(dout: np.ndarray, cache: Any) -> Tuple[np.ndarray, ...]:
    kind, a, b, c = cache
    if kind == "add":
        return dout, dout
    if kind == "mul":
        return dout * b, dout * a
    return dout * (c - b), dout * (1 - a), dout * a


# --- reshape ---

def flatten(x: np.ndarray) -> Tuple[np.ndarray, Tuple[int, ...]]:
    return x.reshape(-1), x.shape


def flatten_backward(dout: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    return dout.reshape(shape)
