from typing import List

import numpy as np

from terranp.autodiff.module import Module
from terranp.autodiff.tensor import Tensor, conv2d


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape: tuple) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Linear(Module):
    """``x @ W + b`` over the last axis."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.n_in = n_in
        self.n_out = n_out
        self.weight = self.param("weight", glorot(rng, n_in, n_out, (n_in, n_out)))
        self.bias = self.param("bias", np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class MLP(Module):
    """
    Stack of :obj:`Linear` layers with ReLU in between.

    Arguments:
        sizes: layer widths, input first
        final_activation: apply ReLU after the last layer too
    """

    def __init__(
        self, sizes: List[int], rng: np.random.Generator, final_activation: bool = False
    ) -> None:
        super().__init__()
        self.layers: List[Linear] = []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.layers.append(self.child(str(i), Linear(n_in, n_out, rng)))
        self.final_activation = final_activation

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or self.final_activation:
                x = x.relu()
        return x


class Conv2d(Module):
    """Same-size convolution of a (C_in, H, W) image."""

    def __init__(
        self,
        n_in: int,
        n_out: int,
        rng: np.random.Generator,
        kernel: int = 3,
        dilation: int = 1,
    ) -> None:
        super().__init__()
        self.dilation = dilation
        fan = n_in * kernel * kernel
        self.weight = self.param(
            "weight", glorot(rng, fan, n_out * kernel * kernel, (n_out, n_in, kernel, kernel))
        )
        self.bias = self.param("bias", np.zeros((n_out, 1, 1)))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, dilation=self.dilation) + self.bias
