"""Adam optimizer with bias correction.

Defaults follow the training setup this package targets: learning rate 5e-4
with beta1=0.99 and beta2=0.9.  That beta ordering is unusual (heavy first
moment, fast second moment) but is kept as the default on purpose; both are
plain constructor arguments.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import Parameter


class AdamState:
    """Per-parameter moments plus the shared step counter."""

    def __init__(self, params: Sequence[Parameter]):
        self.m = {p.name: np.zeros_like(p.data) for p in params}
        self.v = {p.name: np.zeros_like(p.data) for p in params}
        self.t = 0


class Adam:
    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 5e-4,
        beta1: float = 0.99,
        beta2: float = 0.9,
        eps: float = 1e-8,
    ):
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState(self.params)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        """One Adam update from the gradients currently on the parameters.

        A non-finite gradient anywhere rejects the whole step.
        """
        for p in self.params:
            if p.grad is None:
                raise ValueError(f"parameter {p.name!r} has no gradient")
            if not np.isfinite(p.grad).all():
                raise FloatingPointError(
                    f"non-finite gradient on {p.name!r}; step rejected"
                )
        self.state.t += 1
        t = self.state.t
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p in self.params:
            g = p.grad
            m = self.state.m[p.name]
            v = self.state.v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
