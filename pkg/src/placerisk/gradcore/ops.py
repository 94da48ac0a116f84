"""Differentiable operations: exactly the set the placing-risk network needs.

All functions take and return :class:`Tensor`.  Forward math is vectorized
numpy; convolution goes through im2col so the inner product runs in BLAS.
Backward closures are attached only while gradients are enabled and at least
one input requires them.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .tensor import Tensor, grad_enabled


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _backward=backward)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / structural
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _make(out, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _make(out, (a, b), backward)


def tsum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    out = a.data.sum()

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.broadcast_to(g, a.shape))

    return _make(out, (a,), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = a.data.reshape(shape)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.shape))

    return _make(out, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    out = np.concatenate([t.data for t in tensors], axis=axis)
    extents = [t.shape[axis] for t in tensors]

    def backward(g):
        offset = 0
        for t, n in zip(tensors, extents):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + n)
                t.accumulate_grad(g[tuple(idx)])
            offset += n

    return _make(out, tuple(tensors), backward)


def narrow(a: Tensor, start: int, stop: int, axis: int = 1) -> Tensor:
    """Contiguous slice along one axis."""
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = a.data[idx]

    def backward(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[idx] = g
            a.accumulate_grad(full)

    return _make(out, (a,), backward)


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0)

    def backward(g):
        if a.requires_grad:
            # subgradient at 0 is defined as 0
            a.accumulate_grad(g * (a.data > 0))

    return _make(out, (a,), backward)


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _stable_sigmoid(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * s * (1.0 - s))

    return _make(s, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - t * t))

    return _make(t, (a,), backward)


_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def activation(kind: str, a: Tensor) -> Tensor:
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; expected one of {sorted(_ACTIVATIONS)}")
    return fn(a)


def softmax(a: Tensor, axis: int = 1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * p).sum(axis=axis, keepdims=True)
            a.accumulate_grad(p * (g - dot))

    return _make(p, (a,), backward)


# ---------------------------------------------------------------------------
# dense / conv / pooling / normalization
# ---------------------------------------------------------------------------


def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map: ``x @ weight + bias`` with x [N,D], weight [D,E]."""
    if x.ndim != 2 or weight.ndim != 2:
        raise ValueError(f"dense expects 2-d input and weight, got {x.shape} and {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise ValueError(
            f"dense dimension mismatch: input {x.shape} vs weight {weight.shape}"
        )
    out = x.data @ weight.data
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise ValueError(f"dense bias shape {bias.shape} != ({weight.shape[1]},)")
        out = out + bias.data

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g @ weight.data.T)
        if weight.requires_grad:
            weight.accumulate_grad(x.data.T @ g)
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=0))

    return _make(out, parents, backward)


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor], stride: int = 1, pad: int = 0) -> Tensor:
    """2-d cross-correlation, NCHW layout, single symmetric zero pad.

    Internally runs channels-last so the im2col gather and the GEMM stream
    contiguous channel runs; the returned tensor is a logical-NCHW view,
    which keeps chained convolutions copy-free.
    """
    if x.ndim != 4:
        raise ValueError(f"conv2d expects input [N,C,H,W], got shape {x.shape}")
    if weight.ndim != 4:
        raise ValueError(f"conv2d expects weight [K,C,kh,kw], got shape {weight.shape}")
    n, c, h, w = x.shape
    k, cw, kh, kw = weight.shape
    if min(x.shape) == 0 or min(weight.shape) == 0:
        raise ValueError("conv2d rejects zero-extent dimensions")
    if cw != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, weight expects {cw}")
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise ValueError(
            f"conv2d kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w + 2 * pad}"
        )
    if bias is not None and bias.shape != (k,):
        raise ValueError(f"conv2d bias shape {bias.shape} != ({k},)")

    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    xl = np.ascontiguousarray(x.data.transpose(0, 2, 3, 1))  # (N, H, W, C)
    if pad:
        xl = np.pad(xl, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    sn, sh, sw, sc = xl.strides
    windows = np.lib.stride_tricks.as_strided(
        xl,
        shape=(n, oh, ow, kh, kw, c),
        strides=(sn, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )
    cols = windows.reshape(n * oh * ow, kh * kw * c)  # gather copy
    wmat = np.ascontiguousarray(weight.data.transpose(2, 3, 1, 0)).reshape(kh * kw * c, k)
    out = cols @ wmat
    if bias is not None:
        out += bias.data
    out = out.reshape(n, oh, ow, k).transpose(0, 3, 1, 2)  # NCHW view, NHWC memory

    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gmat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * oh * ow, k)
        if weight.requires_grad:
            dw = (cols.T @ gmat).reshape(kh, kw, c, k).transpose(3, 2, 0, 1)
            weight.accumulate_grad(dw)
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(gmat.sum(axis=0))
        if x.requires_grad:
            dcols = (gmat @ wmat.T).reshape(n, oh, ow, kh, kw, c)
            dxp = np.zeros((n, h + 2 * pad, w + 2 * pad, c), dtype=x.data.dtype)
            for i in range(kh):
                hi = i + stride * oh
                for j in range(kw):
                    wj = j + stride * ow
                    dxp[:, i:hi:stride, j:wj:stride, :] += dcols[:, :, :, i, j, :]
            if pad:
                dxp = dxp[:, pad : pad + h, pad : pad + w, :]
            x.accumulate_grad(dxp.transpose(0, 3, 1, 2))

    return _make(out, parents, backward)


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean: [N,C,H,W] -> [N,C]."""
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool expects [N,C,H,W], got shape {x.shape}")
    n, c, h, w = x.shape
    if h < 1 or w < 1:
        raise ValueError("global_avg_pool needs at least one spatial element")
    out = x.data.mean(axis=(2, 3))

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(
                np.broadcast_to(g[:, :, None, None] / (h * w), x.shape).astype(x.data.dtype)
            )

    return _make(out, (x,), backward)


class BatchNormState:
    """Running statistics for one batch-norm layer (mutated in train mode)."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float64):
        if eps <= 0:
            raise ValueError("batch_norm eps must be > 0")
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, training: bool) -> Tensor:
    """Per-channel normalization over (N, H, W); running stats in eval mode."""
    if x.ndim != 4:
        raise ValueError(f"batch_norm expects [N,C,H,W], got shape {x.shape}")
    n, c, h, w = x.shape
    if n * h * w < 1:
        raise ValueError("batch_norm needs at least one element per channel")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"batch_norm gamma/beta must have shape ({c},)")
    eps = state.eps

    if training:
        mean = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        state.running_mean = (1 - state.momentum) * state.running_mean + state.momentum * mean
        state.running_var = (1 - state.momentum) * state.running_var + state.momentum * var
    else:
        mean = state.running_mean
        var = state.running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            beta.accumulate_grad(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gx = g * gamma.data[None, :, None, None]
            if training:
                m = n * h * w
                s1 = gx.sum(axis=(0, 2, 3), keepdims=True)
                s2 = (gx * xhat).sum(axis=(0, 2, 3), keepdims=True)
                dx = (inv_std[None, :, None, None] / m) * (m * gx - s1 - xhat * s2)
            else:
                dx = gx * inv_std[None, :, None, None]
            x.accumulate_grad(dx.astype(x.data.dtype, copy=False))

    return _make(out, (x, gamma, beta), backward)


def softmax_cross_entropy(logits: Tensor, labels: Tensor) -> Tensor:
    """Summed cross-entropy of softmax(logits) against one-hot labels.

    Stabilized through log-sum-exp; gradient is ``softmax - labels``.
    """
    if logits.ndim != 2 or labels.shape != logits.shape:
        raise ValueError(
            f"softmax_cross_entropy expects matching [N,M] pairs, got {logits.shape} and {labels.shape}"
        )
    n, m = logits.shape
    if m < 2:
        raise ValueError("softmax_cross_entropy needs at least 2 classes")
    ldata = labels.data
    one_hot = (
        np.all((ldata == 0) | (ldata == 1), axis=1)
        & (np.abs(ldata.sum(axis=1) - 1.0) < 1e-12)
    )
    if not one_hot.all():
        bad = int(np.flatnonzero(~one_hot)[0])
        raise ValueError(f"labels row {bad} is not one-hot: {ldata[bad]}")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    out = -(ldata * logp).sum()

    def backward(g):
        if logits.requires_grad:
            p = np.exp(logp)
            logits.accumulate_grad(g * (p - ldata))

    return _make(out, (logits, labels), backward)
