"""The placing-risk classifier: config, variants, forward pass, loss."""

from .config import ModelConfig, HeuristicInput, VARIANTS, INPUT_MODES
from .network import (
    PlacingRiskNet,
    ForwardOutput,
    build_variant,
    apply_attention,
    self_attention_fuse,
    total_loss,
    head_probabilities,
    SelfAttentionFusion,
)

__all__ = [
    "ModelConfig",
    "HeuristicInput",
    "VARIANTS",
    "INPUT_MODES",
    "PlacingRiskNet",
    "ForwardOutput",
    "build_variant",
    "apply_attention",
    "self_attention_fuse",
    "total_loss",
    "head_probabilities",
    "SelfAttentionFusion",
]
