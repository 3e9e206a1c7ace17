# sosdetect/geometry/__init__.py
# !/usr/bin/env python3

"""
Axis-aligned box arithmetic, IoU, NMS and patch-to-image projection.
"""

from .boxes import (
    BoxF,
    Detection,
    clip_to_image,
    detection_sort_key,
    iou,
    iou_matrix,
    project_to_original,
)
from .nms import nms

__all__ = [
    "BoxF",
    "Detection",
    "clip_to_image",
    "detection_sort_key",
    "iou",
    "iou_matrix",
    "project_to_original",
    "nms",
]
