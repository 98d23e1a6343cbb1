# training/optimizer.py
import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

import config
from exceptions import NonFiniteGradientError
from tensors import Param

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = config.ADAM_CONFIG["beta1"]
    beta2: float = config.ADAM_CONFIG["beta2"]
    epsilon: float = config.ADAM_CONFIG["epsilon"]
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Dict[str, Param], state: AdamState) -> AdamState:
    """One bias-corrected Adam update over every parameter, then zero the grads.

    Gradients are checked before anything is touched, so a non-finite
    gradient leaves parameters and moments unchanged.
    """
    for key, param in params.items():
        if not np.all(np.isfinite(param.grad)):
            raise NonFiniteGradientError(key)

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    step_size = state.lr / bc1

    for key, param in params.items():
        g = param.grad
        if key not in state.m:
            state.m[key] = np.zeros_like(param.value)
            state.v[key] = np.zeros_like(param.value)
        m, v = state.m[key], state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v * (1.0 / bc2)) + state.epsilon
        param.value -= (step_size * m / denom).astype(param.value.dtype)
        param.zero_grad()
    return state


class Adam:
    """Owns an AdamState for a fixed parameter dictionary."""

    def __init__(self, params: Dict[str, Param], lr: float = 1e-4, **hyper):
        self.params = params
        self.state = AdamState(lr=lr, **hyper)

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()
