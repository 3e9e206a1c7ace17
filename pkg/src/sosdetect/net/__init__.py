# sosdetect/net/__init__.py
# !/usr/bin/env python3

"""
Minimal NumPy tensor engine and the small-object detector built on it.
"""

from .checkpoint import checkpoint_bytes, load_checkpoint, save_checkpoint
from .layers import (
    conv2d,
    conv2d_backward,
    conv2d_forward,
    maxpool2,
    maxpool2_backward,
    maxpool2_forward,
    relu,
    relu_backward,
    relu_forward,
)
from .model import (
    DetectorModel,
    ModelConfig,
    forward_detector,
    init_weights,
    patches_to_tensor,
    prediction_count,
    receptive_field,
)

__all__ = [
    "checkpoint_bytes",
    "load_checkpoint",
    "save_checkpoint",
    "conv2d",
    "conv2d_backward",
    "conv2d_forward",
    "maxpool2",
    "maxpool2_backward",
    "maxpool2_forward",
    "relu",
    "relu_backward",
    "relu_forward",
    "DetectorModel",
    "ModelConfig",
    "forward_detector",
    "init_weights",
    "patches_to_tensor",
    "prediction_count",
    "receptive_field",
]
