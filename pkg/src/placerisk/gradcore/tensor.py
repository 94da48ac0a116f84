"""Reverse-mode autodiff tensor with a dynamically recorded graph.

Every operation in :mod:`placerisk.gradcore.ops` produces a new Tensor whose
``_backward`` closure scatters the output gradient into its parents.  Calling
:meth:`Tensor.backward` on a scalar walks the recorded graph once, in reverse
topological order, accumulating (summing) gradients along all paths.

Tensors are treated as immutable once produced; only Parameters are updated
in place, and only by the optimizer.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Optional

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """An n-d float array participating in a differentiable computation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_spent")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple = (),
        _backward: Optional[Callable[[np.ndarray], None]] = None,
    ):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self._spent = False

    # ---- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    # ---- gradient plumbing ----------------------------------------------

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        """Populate gradients of everything this scalar depends on.

        Raises if called twice on the same graph: gradients are zeroed
        explicitly by the caller, never implicitly, so a silent second pass
        would double-count.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar loss, got shape {self.shape}"
            )
        if self._spent:
            raise RuntimeError(
                "backward() already ran on this graph; rebuild the forward "
                "pass (gradients never accumulate implicitly)"
            )
        order = topo_order(self)
        for node in order:
            node._spent = True
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # ---- convenience arithmetic (thin wrappers over ops) -----------------

    def __add__(self, other):
        from . import ops

        return ops.add(self, ops.as_tensor(other))

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, ops.as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops

        return ops.mul(self, ops.as_tensor(-1.0))

    def __sub__(self, other):
        from . import ops

        return ops.add(self, ops.mul(ops.as_tensor(other), ops.as_tensor(-1.0)))


class Parameter(Tensor):
    """A named leaf tensor that always requires gradients."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.zero_grad()

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def topo_order(root: Tensor) -> list:
    """Topological order of the graph below ``root`` (iterative DFS).

    Each node appears exactly once; parents precede children.
    """
    order: list = []
    seen: set = set()
    stack: list = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def collect_parameters(tensors: Iterable[Tensor]) -> list:
    """All distinct Parameters reachable from the given roots."""
    params = []
    seen: set = set()
    for t in tensors:
        for node in topo_order(t):
            if isinstance(node, Parameter) and id(node) not in seen:
                seen.add(id(node))
                params.append(node)
    return params
