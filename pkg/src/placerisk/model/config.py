"""Model configuration and the heuristic (grasp-time) input."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

import numpy as np

VARIANTS = ("type1", "type2", "type3", "type4", "full")
INPUT_MODES = ("rgb", "d", "rgbd")

CONFIG_SCHEMA_VERSION = 1


@dataclass
class HeuristicInput:
    """Target extents plus camera height, known the moment the target is grasped."""

    width: float
    height: float
    length: float
    camera_height: float

    def __post_init__(self):
        for name, v in self.as_dict().items():
            if not (0.0 < v < 2.0):
                raise ValueError(f"heuristic input {name}={v} outside (0, 2.0) m")

    def as_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "length": self.length,
            "camera_height": self.camera_height,
        }

    def as_array(self) -> np.ndarray:
        return np.array([self.width, self.height, self.length, self.camera_height])


@dataclass
class ModelConfig:
    """Architecture variant plus every scale knob, desk-sized by default.

    The desk defaults (32 px input, 8x8x32 feature maps, 32-d stream
    features) mirror the reference layout at reduced scale; the same fields
    reach the published scale with 224 px input, 14x14x256 maps and 256-d
    features (see :meth:`paper_scale`).
    """

    variant: str = "full"
    input_mode: str = "rgbd"
    input_side: int = 32
    pre_channels: Tuple[int, ...] = (12, 20, 32)
    pre_strides: Tuple[int, ...] = (1, 2, 2)
    branch_blocks: int = 3
    post_channels: Tuple[int, ...] = (40, 48)
    post_strides: Tuple[int, ...] = (2, 1)
    extra_post_blocks: int = 2  # used by type1 only
    d_o: int = 32
    head_hidden: Tuple[int, ...] = (32, 8)
    n_heads: int = 1
    lambda_r: float = 1.0
    lambda_d: float = 1.0
    lambda_p: float = 0.3
    head_loss_weights: Optional[Tuple[float, ...]] = None
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.input_mode not in INPUT_MODES:
            raise ValueError(f"unknown input mode {self.input_mode!r}; expected one of {INPUT_MODES}")
        if self.variant in ("full", "type4") and self.input_mode != "rgbd":
            raise ValueError(
                f"{self.variant} is dual-stream and only supports input_mode='rgbd', "
                f"got {self.input_mode!r}"
            )
        if len(self.pre_channels) != len(self.pre_strides):
            raise ValueError("pre_channels and pre_strides must have equal length")
        if len(self.post_channels) != len(self.post_strides):
            raise ValueError("post_channels and post_strides must have equal length")
        stride_prod = math.prod(self.pre_strides)
        if self.input_side % stride_prod != 0:
            raise ValueError(
                f"input side {self.input_side} not divisible by total stride {stride_prod}"
            )
        for lam in (self.lambda_r, self.lambda_d, self.lambda_p):
            if lam < 0:
                raise ValueError("loss weights must be >= 0")
        if self.n_heads < 1:
            raise ValueError("need at least one label head")
        if self.head_loss_weights is not None and len(self.head_loss_weights) != self.n_heads:
            raise ValueError("head_loss_weights length must equal n_heads")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def feature_size(self) -> int:
        """Spatial side of the shared feature map (S)."""
        return self.input_side // math.prod(self.pre_strides)

    @property
    def feature_channels(self) -> int:
        return self.pre_channels[-1]

    @property
    def post_feature_size(self) -> int:
        return self.feature_size // math.prod(self.post_strides)

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def head_input_dim(self) -> int:
        streams = 2 if self.variant == "type4" else 1
        return streams * self.d_o + 4

    def head_weights_effective(self) -> Tuple[float, ...]:
        if self.head_loss_weights is None:
            return tuple(1.0 for _ in range(self.n_heads))
        return tuple(self.head_loss_weights)

    @classmethod
    def paper_scale(cls, variant: str = "full", **kwargs) -> "ModelConfig":
        """Published-scale layout: 224 px in, 14x14x256 maps, 256-d features."""
        defaults = dict(
            variant=variant,
            input_side=224,
            pre_channels=(32, 64, 128, 256),
            pre_strides=(2, 2, 2, 2),
            post_channels=(512,),
            post_strides=(2,),
            d_o=256,
            head_hidden=(256, 16),
        )
        defaults.update(kwargs)
        return cls(**defaults)

    @classmethod
    def micro(cls, variant: str = "full", **kwargs) -> "ModelConfig":
        """Tiny double-precision layout for finite-difference checks."""
        defaults = dict(
            variant=variant,
            input_side=16,
            pre_channels=(4, 6, 8),
            pre_strides=(1, 2, 2),
            post_channels=(10, 12),
            post_strides=(2, 1),
            d_o=8,
            head_hidden=(8, 8),
            dtype="float64",
        )
        defaults.update(kwargs)
        return cls(**defaults)

    def to_json(self) -> str:
        doc = {"schema_version": CONFIG_SCHEMA_VERSION}
        doc.update(asdict(self))
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        doc = json.loads(text)
        version = doc.pop("schema_version", None)
        if version != CONFIG_SCHEMA_VERSION:
            raise ValueError(f"unsupported model config schema version {version}")
        for key in ("pre_channels", "pre_strides", "post_channels", "post_strides", "head_hidden"):
            doc[key] = tuple(doc[key])
        if doc.get("head_loss_weights") is not None:
            doc["head_loss_weights"] = tuple(doc["head_loss_weights"])
        return cls(**doc)
