# sosdetect/detect/__init__.py
# !/usr/bin/env python3

"""
Multi-patch, multi-scale, multi-batch inference back to original-image
coordinates.
"""

from .detections import read_detections, write_detections
from .detector import (
    CURVE_THRESHOLD,
    OPERATING_THRESHOLD,
    DetectConfig,
    batch_count,
    detect_image,
    detect_image_candidates,
    detect_patches_batched,
    image_patches,
    restrict_levels,
)
from .levels import NAMED_LEVEL_SETS, LevelSet, parse_levels

__all__ = [
    "read_detections",
    "write_detections",
    "CURVE_THRESHOLD",
    "OPERATING_THRESHOLD",
    "DetectConfig",
    "batch_count",
    "detect_image",
    "detect_image_candidates",
    "detect_patches_batched",
    "image_patches",
    "restrict_levels",
    "NAMED_LEVEL_SETS",
    "LevelSet",
    "parse_levels",
]
