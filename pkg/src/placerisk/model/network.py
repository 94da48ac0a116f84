"""The dual-attention RGBD placing-risk classifier and its ablation variants.

Topology of the full variant, per modality stream k in {r, d}:

    image -> backbone_pre -> f_k -> attention branch -> (a_k, branch logits)
    w_k = (1 + a_k) * f_k -> backbone_post -> o_k

then e_k = V^T tanh(W_k o_k + b_k), (alpha_r, alpha_d) = softmax(e_r, e_d),
m = alpha_r o_r + alpha_d o_d, and the perception head classifies
concat(m, x_h).  Ablations strip parts of this: type4 replaces the fusion
with concatenation, type3 keeps a single attention branch, type1/type2 keep
only the backbone (type1 with two extra residual blocks in the post stage).

The attention map is computed from the two-channel class-conv output (after
its batch norm), then conv(1 kernel) -> ReLU -> sigmoid; with five label
heads the class conv widens to 2 channels per head.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .. import gradcore as gc
from ..gradcore import Tensor, Parameter
from .config import ModelConfig
from .layers import BatchNorm, Conv2d, Dense, ResidualBlock, he_uniform


def apply_attention(f: Tensor, a: Tensor) -> Tensor:
    """Attention weighting ``w = (1 + a) * f`` with a broadcast over channels."""
    if f.shape[0] != a.shape[0] or f.shape[2:] != a.shape[2:] or a.shape[1] != 1:
        raise ValueError(
            f"attention map shape {a.shape} incompatible with features {f.shape}"
        )
    return gc.mul(gc.add(a, gc.Tensor(np.ones((), dtype=a.dtype))), f)


class BackbonePre:
    """Front of the shared feature extractor: conv-BN-ReLU with downsampling."""

    def __init__(self, name, in_channels, cfg: ModelConfig, rng, dtype):
        self.stages = []
        cin = in_channels
        for i, (cout, stride) in enumerate(zip(cfg.pre_channels, cfg.pre_strides)):
            conv = Conv2d(f"{name}.conv{i}", cin, cout, 3, stride, 1, rng, dtype)
            bn = BatchNorm(f"{name}.bn{i}", cout, dtype)
            self.stages.append((conv, bn))
            cin = cout

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        for conv, bn in self.stages:
            x = gc.relu(bn(conv(x), training))
        return x

    def parameters(self):
        out = []
        for conv, bn in self.stages:
            out += conv.parameters() + bn.parameters()
        return out


class AttentionBranch:
    """Residual blocks, a 2-kernel-per-head class conv, and the map generator."""

    def __init__(self, name, cfg: ModelConfig, rng, dtype):
        c = cfg.feature_channels
        self.blocks = [
            ResidualBlock(f"{name}.block{j}", c, rng, dtype) for j in range(cfg.branch_blocks)
        ]
        k = 2 * cfg.n_heads
        self.class_conv = Conv2d(f"{name}.class_conv", c, k, 1, 1, 0, rng, dtype)
        self.class_bn = BatchNorm(f"{name}.class_bn", k, dtype)
        self.att_conv = Conv2d(f"{name}.att_conv", k, 1, 1, 1, 0, rng, dtype)

    def __call__(self, f: Tensor, training: bool):
        h = f
        for block in self.blocks:
            h = block(h, training)
        scores = self.class_bn(self.class_conv(h), training)
        logits = gc.global_avg_pool(scores)  # (N, 2*heads)
        a = gc.sigmoid(gc.relu(self.att_conv(scores)))  # (N, 1, S, S)
        return a, logits

    def parameters(self):
        out = []
        for block in self.blocks:
            out += block.parameters()
        return out + self.class_conv.parameters() + self.class_bn.parameters() + self.att_conv.parameters()


class BackbonePost:
    """Back of the feature extractor: optional blocks, downsampling, GAP, dense."""

    def __init__(self, name, cfg: ModelConfig, rng, dtype, extra_blocks: int = 0):
        c = cfg.feature_channels
        self.blocks = [
            ResidualBlock(f"{name}.block{j}", c, rng, dtype) for j in range(extra_blocks)
        ]
        self.stages = []
        cin = c
        for i, (cout, stride) in enumerate(zip(cfg.post_channels, cfg.post_strides)):
            conv = Conv2d(f"{name}.conv{i}", cin, cout, 3, stride, 1, rng, dtype)
            bn = BatchNorm(f"{name}.bn{i}", cout, dtype)
            self.stages.append((conv, bn))
            cin = cout
        self.fc = Dense(f"{name}.fc", cin, cfg.d_o, rng, dtype)

    def __call__(self, w: Tensor, training: bool) -> Tensor:
        h = w
        for block in self.blocks:
            h = block(h, training)
        for conv, bn in self.stages:
            h = gc.relu(bn(conv(h), training))
        return self.fc(gc.global_avg_pool(h))

    def parameters(self):
        out = []
        for block in self.blocks:
            out += block.parameters()
        for conv, bn in self.stages:
            out += conv.parameters() + bn.parameters()
        return out + self.fc.parameters()


class SelfAttentionFusion:
    """Learned convex combination of the two stream features."""

    def __init__(self, d_o: int, rng, dtype):
        self.w_r = Parameter(he_uniform(rng, (d_o, d_o), d_o, dtype), "fusion.w_r")
        self.b_r = Parameter(np.zeros(d_o, dtype=dtype), "fusion.b_r")
        self.w_d = Parameter(he_uniform(rng, (d_o, d_o), d_o, dtype), "fusion.w_d")
        self.b_d = Parameter(np.zeros(d_o, dtype=dtype), "fusion.b_d")
        self.v = Parameter(he_uniform(rng, (d_o, 1), d_o, dtype), "fusion.v")

    def __call__(self, o_r: Tensor, o_d: Tensor):
        e_r = gc.dense(gc.tanh(gc.dense(o_r, self.w_r, self.b_r)), self.v)
        e_d = gc.dense(gc.tanh(gc.dense(o_d, self.w_d, self.b_d)), self.v)
        alpha = gc.softmax(gc.concat([e_r, e_d], axis=1), axis=1)  # (N, 2)
        a_r = gc.narrow(alpha, 0, 1, axis=1)
        a_d = gc.narrow(alpha, 1, 2, axis=1)
        m = gc.add(gc.mul(a_r, o_r), gc.mul(a_d, o_d))
        return m, alpha

    def parameters(self):
        return [self.w_r, self.b_r, self.w_d, self.b_d, self.v]


class Head:
    """Perception head over the fused feature concatenated with x_h."""

    def __init__(self, cfg: ModelConfig, rng, dtype):
        widths = [cfg.head_input_dim, *cfg.head_hidden]
        self.hidden = [
            Dense(f"head.fc{i}", din, dout, rng, dtype)
            for i, (din, dout) in enumerate(zip(widths[:-1], widths[1:]))
        ]
        self.out = Dense("head.out", widths[-1], 2 * cfg.n_heads, rng, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        for fc in self.hidden:
            x = gc.relu(fc(x))
        return self.out(x)

    def parameters(self):
        out = []
        for fc in self.hidden:
            out += fc.parameters()
        return out + self.out.parameters()


@dataclass
class ForwardOutput:
    """Everything one forward pass yields, tensors still attached to the graph."""

    head_logits: Tensor  # (N, 2*heads)
    probs: np.ndarray  # (N, heads, 2), rows sum to 1
    branch_logits: Dict[str, Tensor]  # stream key -> (N, 2*heads)
    attention: Dict[str, Tensor]  # stream key -> (N, 1, S, S)
    alpha: Optional[np.ndarray]  # (N, 2) fusion weights, full variant only
    fused: Optional[Tensor]  # (N, d_o)

    def head_probs(self, head: int = 0) -> np.ndarray:
        return self.probs[:, head, :]


def head_probabilities(head_logits: Tensor, n_heads: int) -> np.ndarray:
    n = head_logits.shape[0]
    probs = np.empty((n, n_heads, 2), dtype=head_logits.dtype)
    for h in range(n_heads):
        probs[:, h, :] = gc.softmax(gc.narrow(head_logits, 2 * h, 2 * h + 2, axis=1)).data
    return probs


class PlacingRiskNet:
    """A built variant: holds streams, optional fusion, and the head."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        dtype = cfg.np_dtype
        rng = np.random.default_rng(cfg.seed)
        self.streams: Dict[str, dict] = {}

        def build_stream(key: str, in_channels: int, with_branch: bool, extra_blocks: int = 0):
            stream = {
                "pre": BackbonePre(f"{key}.pre", in_channels, cfg, rng, dtype),
                "branch": AttentionBranch(f"{key}.branch", cfg, rng, dtype) if with_branch else None,
                "post": BackbonePost(f"{key}.post", cfg, rng, dtype, extra_blocks),
            }
            self.streams[key] = stream

        v = cfg.variant
        if v in ("full", "type4"):
            build_stream("r", 3, with_branch=True)
            build_stream("d", 3, with_branch=True)
        else:
            key = {"rgb": "r", "d": "d", "rgbd": "rd"}[cfg.input_mode]
            channels = 6 if key == "rd" else 3
            with_branch = v == "type3"
            extra = cfg.extra_post_blocks if v == "type1" else 0
            build_stream(key, channels, with_branch=with_branch, extra_blocks=extra)

        self.fusion = SelfAttentionFusion(cfg.d_o, rng, dtype) if v == "full" else None
        self.head = Head(cfg, rng, dtype)

    # ---- structure ------------------------------------------------------

    def parameters(self) -> List[Parameter]:
        out: List[Parameter] = []
        for stream in self.streams.values():
            out += stream["pre"].parameters()
            if stream["branch"] is not None:
                out += stream["branch"].parameters()
            out += stream["post"].parameters()
        if self.fusion is not None:
            out += self.fusion.parameters()
        out += self.head.parameters()
        names = [p.name for p in out]
        assert len(set(names)) == len(names), "duplicate parameter names"
        return out

    def parameter_names(self) -> List[str]:
        return [p.name for p in self.parameters()]

    def feature_shape(self) -> tuple:
        """(C_f, S, S) of the shared feature map."""
        return (self.cfg.feature_channels, self.cfg.feature_size, self.cfg.feature_size)

    # ---- forward ---------------------------------------------------------

    def _stream_input(self, key: str, rgb, depth) -> np.ndarray:
        def check(img, what):
            if img is None:
                raise ValueError(f"variant {self.cfg.variant!r} needs a {what} image")
            img = np.asarray(img)
            if img.ndim != 4 or img.shape[1] != 3:
                raise ValueError(
                    f"{what} input must be [N,3,side,side] (colorize depth first), got {img.shape}"
                )
            if img.shape[2] != self.cfg.input_side or img.shape[3] != self.cfg.input_side:
                raise ValueError(
                    f"{what} input spatial size {img.shape[2:]} != configured {self.cfg.input_side}"
                )
            return img.astype(self.cfg.np_dtype, copy=False)

        if key == "r":
            return check(rgb, "RGB")
        if key == "d":
            return check(depth, "colorized-depth")
        return np.concatenate([check(rgb, "RGB"), check(depth, "colorized-depth")], axis=1)

    def forward(self, rgb, depth, x_h, training: bool) -> ForwardOutput:
        x_h = np.asarray(x_h, dtype=self.cfg.np_dtype)
        if x_h.ndim != 2 or x_h.shape[1] != 4:
            raise ValueError(f"x_h must be [N,4], got {x_h.shape}")
        if (x_h <= 0).any():
            raise ValueError("heuristic input fields must be strictly positive")

        outs: Dict[str, Tensor] = {}
        branch_logits: Dict[str, Tensor] = {}
        attention: Dict[str, Tensor] = {}
        for key, stream in self.streams.items():
            x = Tensor(self._stream_input(key, rgb, depth))
            f = stream["pre"](x, training)
            if stream["branch"] is not None:
                a, logits = stream["branch"](f, training)
                attention[key] = a
                branch_logits[key] = logits
                f = apply_attention(f, a)
            outs[key] = stream["post"](f, training)

        alpha = None
        fused = None
        if self.cfg.variant == "full":
            fused, alpha_t = self.fusion(outs["r"], outs["d"])
            alpha = alpha_t.data
            head_in = fused
        elif self.cfg.variant == "type4":
            head_in = gc.concat([outs["r"], outs["d"]], axis=1)
        else:
            head_in = next(iter(outs.values()))
            fused = head_in

        logits = self.head(gc.concat([head_in, Tensor(x_h)], axis=1))
        probs = head_probabilities(logits, self.cfg.n_heads)
        return ForwardOutput(
            head_logits=logits,
            probs=probs,
            branch_logits=branch_logits,
            attention=attention,
            alpha=alpha,
            fused=fused,
        )

    # ---- persistence ------------------------------------------------------

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {p.name: p.data for p in self.parameters()}

    def save(self, path) -> None:
        gc.save_checkpoint(path, self.parameters())

    def load(self, path) -> None:
        gc.restore_parameters(self.parameters(), gc.load_checkpoint(path))


def build_variant(cfg: ModelConfig) -> PlacingRiskNet:
    """Assemble the model the config describes (rejecting bad combinations)."""
    return PlacingRiskNet(cfg)


def self_attention_fuse(o_r, o_d, fusion: SelfAttentionFusion):
    """Functional form of the fusion step; returns (m, alpha_r, alpha_d)."""
    m, alpha = fusion(gc.as_tensor(o_r), gc.as_tensor(o_d))
    return m, alpha.data[:, 0], alpha.data[:, 1]


def total_loss(output: ForwardOutput, labels: np.ndarray, cfg: ModelConfig):
    """Weighted sum of the branch and perception cross-entropies.

    ``labels`` is one-hot, shaped (N, n_heads, 2); every branch and the head
    predict the same labels.  With several heads each term is the sum of the
    per-head losses (optionally weighted by ``cfg.head_loss_weights``).
    """
    labels = np.asarray(labels)
    if labels.ndim != 3 or labels.shape[1] != cfg.n_heads or labels.shape[2] != 2:
        raise ValueError(
            f"labels must be one-hot [N,{cfg.n_heads},2], got {labels.shape}"
        )
    head_w = cfg.head_weights_effective()

    def multi_head_xent(logits: Tensor) -> Tensor:
        terms = []
        for h in range(cfg.n_heads):
            if head_w[h] == 0.0:
                continue
            term = gc.softmax_cross_entropy(
                gc.narrow(logits, 2 * h, 2 * h + 2, axis=1), Tensor(labels[:, h, :])
            )
            terms.append(gc.mul(term, gc.as_tensor(head_w[h])) if head_w[h] != 1.0 else term)
        if not terms:
            raise ValueError("all head loss weights are zero")
        total = terms[0]
        for t in terms[1:]:
            total = gc.add(total, t)
        return total

    branch_weight = {"r": cfg.lambda_r, "d": cfg.lambda_d, "rd": cfg.lambda_r}
    parts = {}
    terms = []
    for key, logits in output.branch_logits.items():
        j = multi_head_xent(logits)
        parts[f"branch_{key}"] = j.item()
        lam = branch_weight[key]
        if lam != 0.0:
            terms.append(gc.mul(j, gc.as_tensor(lam)) if lam != 1.0 else j)
    j_p = multi_head_xent(output.head_logits)
    parts["perception"] = j_p.item()
    if cfg.lambda_p != 0.0:
        terms.append(gc.mul(j_p, gc.as_tensor(cfg.lambda_p)) if cfg.lambda_p != 1.0 else j_p)

    if not terms:
        raise ValueError("all loss weights are zero; nothing to optimize")
    total = terms[0]
    for t in terms[1:]:
        total = gc.add(total, t)
    return total, parts
