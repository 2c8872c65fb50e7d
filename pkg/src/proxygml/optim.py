import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError


@dataclass
class AdamState:
    base_lr: float
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0


@dataclass
class Adam:
    """Bias-corrected Adam over one parameter group (one array)."""

    base_lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    state: AdamState = field(init=False)

    def __post_init__(self):
        self.state = AdamState(base_lr=self.base_lr)

    def step(self, param, grad, lr=None):
        adam_step(param, grad, self.state, self.base_lr if lr is None else lr,
                  self.beta1, self.beta2, self.eps)
        return param


def adam_step(param, grad, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Update ``param`` in place and advance ``state``."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != param.shape:
        raise ParameterError(f"gradient shape {grad.shape} != parameter shape {param.shape}")
    if not lr > 0:
        raise ParameterError(f"learning rate must be positive, got {lr}")
    if not np.all(np.isfinite(grad)):
        bad = np.argwhere(~np.isfinite(grad))[0]
        raise DivergenceError(f"non-finite gradient at index {tuple(int(i) for i in bad)} (step {state.t + 1})")
    if state.m is None:
        state.m = np.zeros_like(param)
        state.v = np.zeros_like(param)
    state.t += 1
    state.m *= beta1
    state.m += (1.0 - beta1) * grad
    state.v *= beta2
    state.v += (1.0 - beta2) * (grad * grad)
    m_hat = state.m / (1.0 - beta1 ** state.t)
    v_hat = state.v / (1.0 - beta2 ** state.t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param, state


def lr_at_epoch(base_lr, epoch, decay_every, decay_factor):
    if decay_every < 1:
        raise ParameterError("decay_every must be >= 1")
    return base_lr * decay_factor ** math.floor(epoch / decay_every)
