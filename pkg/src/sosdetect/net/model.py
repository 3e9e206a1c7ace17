# sosdetect/net/model.py
# !/usr/bin/env python3

"""
The small-object detector: four convolutional stages (pooling after the
first three, feature stride 8) followed by parallel 3x3 localisation and
confidence heads on the single 25x25 feature map.

Head channel layout groups by anchor slot first: conf channel = slot * c + class,
loc channel = slot * 4 + coordinate. Reshaping (B, slots * k, S, S) to
(B, S, S, slots, k) therefore lines predictions up with AnchorGrid order.
"""

import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .._exceptions import ConfigError, ShapeError
from .._random import make_rng
from ..anchors.anchors import AnchorSpec
from .layers import Conv3x3, Layer, MaxPool2, ReLU
from .net_utils import check_finite

logger = logging.getLogger(__name__)

STAGES = 4
COORDS = 4
INPUT_CHANNELS = 3


@dataclass(frozen=True)
class ModelConfig:
    class_count_with_background: int = 6
    stage_channels: Tuple[int, ...] = (8, 16, 32, 48)
    convs_per_stage: int = 2
    anchor_spec: AnchorSpec = field(default_factory=AnchorSpec)

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))
        if len(self.stage_channels) != STAGES:
            raise ConfigError(f"Exactly {STAGES} stages are required, got {self.stage_channels}")
        if any(c < 1 for c in self.stage_channels):
            raise ConfigError(f"Stage channel counts must be positive: {self.stage_channels}")
        if self.convs_per_stage < 1:
            raise ConfigError("convs_per_stage must be >= 1")
        if self.class_count_with_background < 2:
            raise ConfigError("class_count_with_background must be >= 2")
        pooled = self.anchor_spec.input_side // 2 ** (STAGES - 1)
        if pooled * 2 ** (STAGES - 1) != self.anchor_spec.input_side or (
            pooled != self.anchor_spec.feature_side
        ):
            raise ConfigError(
                f"input_side {self.anchor_spec.input_side} does not reduce to "
                f"feature_side {self.anchor_spec.feature_side} after "
                f"{STAGES - 1} poolings"
            )

    @property
    def foreground_classes(self) -> int:
        return self.class_count_with_background - 1

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["stage_channels"] = list(self.stage_channels)
        data["anchor_spec"]["aspect_ratios"] = list(self.anchor_spec.aspect_ratios)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        data = dict(data)
        if "anchor_spec" in data:
            data["anchor_spec"] = AnchorSpec(**data["anchor_spec"])
        return cls(**data)


def prediction_count(class_count_with_background: int, anchor_spec: AnchorSpec) -> int:
    """(c + 4) * n * w * h scalar predictions per patch."""
    return (
        (class_count_with_background + COORDS)
        * anchor_spec.boxes_per_cell
        * anchor_spec.feature_side
        * anchor_spec.feature_side
    )


def build_layers(config: ModelConfig) -> Tuple[List[Layer], Conv3x3, Conv3x3]:
    """Returns (trunk layers, loc head, conf head)."""
    trunk: List[Layer] = []
    in_channels = INPUT_CHANNELS
    for s, out_channels in enumerate(config.stage_channels, start=1):
        for k in range(1, config.convs_per_stage + 1):
            trunk.append(Conv3x3(f"stage{s}.conv{k}", in_channels, out_channels))
            trunk.append(ReLU())
            in_channels = out_channels
        if s < STAGES:
            trunk.append(MaxPool2())
    slots = config.anchor_spec.boxes_per_cell
    loc_head = Conv3x3("head.loc", in_channels, slots * COORDS)
    conf_head = Conv3x3("head.conf", in_channels, slots * config.class_count_with_background)
    return trunk, loc_head, conf_head


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    trunk, loc_head, conf_head = build_layers(config)
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    for layer in [*trunk, loc_head, conf_head]:
        if isinstance(layer, Conv3x3):
            weight_name, bias_name = layer.param_names
            shapes[weight_name] = layer.weight_shape
            shapes[bias_name] = (layer.out_channels,)
    return shapes


def receptive_field(config: ModelConfig) -> int:
    """Receptive field, in input pixels, of one head output."""
    trunk, loc_head, _ = build_layers(config)
    field_size, jump = 1, 1
    for layer in [*trunk, loc_head]:
        if isinstance(layer, Conv3x3):
            field_size += 2 * jump
        elif isinstance(layer, MaxPool2):
            field_size += jump
            jump *= 2
    return field_size


class ForwardCache(NamedTuple):
    trunk: List[Any]
    features: np.ndarray
    loc: Any
    conf: Any


class DetectorModel:
    """
    Parameters of the detector plus the layer graph that uses them.

    `params` maps names such as "stage1.conv1.weight" or "head.conf.bias" to
    float32 arrays, in the canonical order of `parameter_shapes`.
    """

    def __init__(
        self,
        config: ModelConfig,
        params: "OrderedDict[str, np.ndarray]",
        seed: Optional[int] = None,
    ):
        expected = parameter_shapes(config)
        if list(params) != list(expected):
            raise ShapeError(
                f"Parameter names {list(params)} do not match the model layout"
            )
        for name, shape in expected.items():
            if tuple(params[name].shape) != shape:
                raise ShapeError(
                    f"Parameter {name} has shape {params[name].shape}, expected {shape}"
                )
        self.config = config
        self.params = params
        self.seed = seed
        self.trunk, self.loc_head, self.conf_head = build_layers(config)

    def copy(self) -> "DetectorModel":
        return DetectorModel(
            self.config,
            OrderedDict((name, value.copy()) for name, value in self.params.items()),
            self.seed,
        )

    def forward(
        self, x: np.ndarray, check_numerics: bool = False
    ) -> Tuple[np.ndarray, np.ndarray, ForwardCache]:
        """Returns (conf, loc, cache) for a (B, 3, side, side) batch."""
        caches = []
        h = x
        for layer in self.trunk:
            h, cache = layer.forward(self.params, h)
            caches.append(cache)
            if check_numerics:
                check_finite(type(layer).__name__, h)
        loc, loc_cache = self.loc_head.forward(self.params, h)
        conf, conf_cache = self.conf_head.forward(self.params, h)
        if check_numerics:
            check_finite("loc head", loc)
            check_finite("conf head", conf)
        return conf, loc, ForwardCache(caches, h, loc_cache, conf_cache)

    def backward(
        self, cache: ForwardCache, grad_conf: np.ndarray, grad_loc: np.ndarray
    ) -> "OrderedDict[str, np.ndarray]":
        """Gradients of every parameter given the head output gradients."""
        grads: Dict[str, np.ndarray] = {}
        grad_features, head_grads = self.loc_head.backward(self.params, grad_loc, cache.loc)
        grads.update(head_grads)
        grad_conf_features, head_grads = self.conf_head.backward(
            self.params, grad_conf, cache.conf
        )
        grads.update(head_grads)
        g = grad_features + grad_conf_features
        for layer, layer_cache in zip(reversed(self.trunk), reversed(cache.trunk)):
            g, layer_grads = layer.backward(self.params, g, layer_cache)
            grads.update(layer_grads)
        return OrderedDict((name, grads[name]) for name in self.params)


def init_weights(config: ModelConfig, seed: int) -> DetectorModel:
    """He-normal weights, N(0, sqrt(2 / fan_in)), zero biases; deterministic per seed."""
    rng = make_rng(seed)
    trunk, loc_head, conf_head = build_layers(config)
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for layer in [*trunk, loc_head, conf_head]:
        if not isinstance(layer, Conv3x3):
            continue
        weight_name, bias_name = layer.param_names
        std = np.sqrt(2.0 / layer.fan_in)
        params[weight_name] = rng.normal(0.0, std, size=layer.weight_shape).astype(np.float32)
        params[bias_name] = np.zeros(layer.out_channels, dtype=np.float32)
    logger.debug(f"Initialised {len(params)} parameter tensors with seed {seed}")
    return DetectorModel(config, params, seed)


def patches_to_tensor(patches: Sequence[np.ndarray]) -> np.ndarray:
    """Stacks (H, W, 3) uint8 patches into a (B, 3, H, W) float32 batch in [0, 1]."""
    batch = np.stack([np.asarray(p) for p in patches]).astype(np.float32)
    return np.ascontiguousarray(batch.transpose(0, 3, 1, 2)) / np.float32(255.0)


def forward_detector(
    model: DetectorModel, batch: np.ndarray, check_numerics: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Runs the detector on a normalised (B, 3, side, side) batch and returns
    (conf, loc) of shapes (B, slots * c, S, S) and (B, slots * 4, S, S).
    """
    side = model.config.anchor_spec.input_side
    if batch.ndim != 4 or batch.shape[1] != INPUT_CHANNELS or batch.shape[2:] != (side, side):
        raise ShapeError(f"Detector input must be (B, 3, {side}, {side}), got {batch.shape}")
    conf, loc, _ = model.forward(batch, check_numerics=check_numerics)
    return conf, loc


def head_to_anchor_major(pred: np.ndarray, slots: int) -> np.ndarray:
    """(B, slots * k, S, S) -> (B, S * S * slots, k) in AnchorGrid order."""
    batch, channels, size, _ = pred.shape
    k = channels // slots
    return (
        pred.reshape(batch, slots, k, size, size)
        .transpose(0, 3, 4, 1, 2)
        .reshape(batch, size * size * slots, k)
    )


def anchor_major_to_head(values: np.ndarray, slots: int, size: int) -> np.ndarray:
    """Inverse of head_to_anchor_major."""
    batch, _, k = values.shape
    return np.ascontiguousarray(
        values.reshape(batch, size, size, slots, k)
        .transpose(0, 3, 4, 1, 2)
        .reshape(batch, slots * k, size, size)
    )
