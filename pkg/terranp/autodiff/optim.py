import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from terranp.autodiff.tensor import Tensor
from terranp.core.exceptions import ShapeError

logger = logging.getLogger(__name__)


class AdamState(object):
    """
    Moments and hyper-parameters of Adam.

    Attributes:
        m (list): first moments, one array per parameter
        v (list): second moments, one array per parameter
        step (int): updates applied so far
    """

    __slots__ = ("m", "v", "step", "lr", "beta1", "beta2", "eps")

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.m: List[np.ndarray] = [np.zeros_like(p.data) for p in params]
        self.v: List[np.ndarray] = [np.zeros_like(p.data) for p in params]
        self.step = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def __repr__(self) -> str:
        return f"AdamState(step={self.step}, lr={self.lr})"


def adam_step(
    params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState
) -> Tuple[Sequence[Tensor], AdamState]:
    """
    One bias-corrected Adam update. Parameter arrays are replaced, not
    modified, so arrays captured by an earlier forward pass stay intact.
    """
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("params, grads and optimizer moments differ in length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} doesn't match parameter {p.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data = p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


class StepLR(object):
    """
    Halves the learning rate every ``ceil(epochs / 3)`` epochs.

    Arguments:
        state: optimizer state whose ``lr`` is driven
        epochs: planned number of epochs
        gamma: multiplicative decay
    """

    def __init__(self, state: AdamState, epochs: int, gamma: float = 0.5) -> None:
        self.state = state
        self.base_lr = state.lr
        self.period = max(1, math.ceil(epochs / 3))
        self.gamma = gamma

    def lr_at(self, epoch: int) -> float:
        return self.base_lr * self.gamma ** (epoch // self.period)

    def set_epoch(self, epoch: int) -> float:
        self.state.lr = self.lr_at(epoch)
        return self.state.lr
