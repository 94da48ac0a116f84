"""Central-difference gradient verification.

The probe scalarizes an op's output through a fixed random projection, runs
the recorded backward pass, then perturbs every input element by +/-step and
compares.  Double precision inputs are expected; the returned value is the
worst relative error over all elements of all checked inputs.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor
from . import ops


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def finite_difference(f: Callable[[], float], arr: np.ndarray, step: float) -> np.ndarray:
    """Central differences of a scalar callable w.r.t. every element of arr.

    ``f`` must re-read ``arr`` on each call; ``arr`` is restored afterwards.
    """
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        hi = f()
        flat[i] = keep - step
        lo = f()
        flat[i] = keep
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def grad_check(
    op: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    step: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between recorded and numerical gradients of ``op``."""
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    tensors = [Tensor(a, requires_grad=True) for a in arrays]

    probe_rng = np.random.default_rng(seed)
    probe = {}

    def scalar_loss() -> float:
        out = op(*[Tensor(a) for a in arrays])
        if "w" not in probe:
            probe["w"] = probe_rng.standard_normal(out.shape)
        return float((out.data * probe["w"]).sum())

    out = op(*tensors)
    if "w" not in probe:
        probe["w"] = probe_rng.standard_normal(out.shape)
    loss = ops.tsum(ops.mul(out, Tensor(probe["w"])))
    loss.backward()

    worst = 0.0
    for t, arr in zip(tensors, arrays):
        numeric = finite_difference(scalar_loss, arr, step)
        analytic = t.grad if t.grad is not None else np.zeros_like(arr)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
