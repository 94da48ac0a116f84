"""Parameterized building blocks assembled by the network builder.

Each layer owns named Parameters; initialization is He-style uniform with
fan-in scaling, drawn from the generator the builder threads through, so a
model is a pure function of (config, seed).
"""

from __future__ import annotations

from typing import List

import numpy as np

from ..gradcore import (
    BatchNormState,
    Parameter,
    Tensor,
    batch_norm,
    conv2d,
    dense,
    relu,
)


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Conv2d:
    def __init__(self, name, cin, cout, k, stride, pad, rng, dtype):
        self.stride = stride
        self.pad = pad
        self.weight = Parameter(he_uniform(rng, (cout, cin, k, k), cin * k * k, dtype), f"{name}.weight")
        self.bias = Parameter(np.zeros(cout, dtype=dtype), f"{name}.bias")

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)

    def parameters(self) -> List[Parameter]:
        return [self.weight, self.bias]


class Dense:
    def __init__(self, name, din, dout, rng, dtype, bias=True):
        self.weight = Parameter(he_uniform(rng, (din, dout), din, dtype), f"{name}.weight")
        self.bias = Parameter(np.zeros(dout, dtype=dtype), f"{name}.bias") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.weight, self.bias)

    def parameters(self) -> List[Parameter]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class BatchNorm:
    def __init__(self, name, channels, dtype, momentum=0.1, eps=1e-5):
        self.gamma = Parameter(np.ones(channels, dtype=dtype), f"{name}.gamma")
        self.beta = Parameter(np.zeros(channels, dtype=dtype), f"{name}.beta")
        self.state = BatchNormState(channels, momentum=momentum, eps=eps, dtype=dtype)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        return batch_norm(x, self.gamma, self.beta, self.state, training)

    def parameters(self) -> List[Parameter]:
        return [self.gamma, self.beta]


class ResidualBlock:
    """Full pre-activation residual block: BN-ReLU-conv, twice, plus skip."""

    def __init__(self, name, channels, rng, dtype):
        self.bn1 = BatchNorm(f"{name}.bn1", channels, dtype)
        self.conv1 = Conv2d(f"{name}.conv1", channels, channels, 3, 1, 1, rng, dtype)
        self.bn2 = BatchNorm(f"{name}.bn2", channels, dtype)
        self.conv2 = Conv2d(f"{name}.conv2", channels, channels, 3, 1, 1, rng, dtype)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        h = self.conv1(relu(self.bn1(x, training)))
        h = self.conv2(relu(self.bn2(h, training)))
        return x + h

    def parameters(self) -> List[Parameter]:
        return (
            self.bn1.parameters()
            + self.conv1.parameters()
            + self.bn2.parameters()
            + self.conv2.parameters()
        )
