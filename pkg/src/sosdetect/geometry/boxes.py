# sosdetect/geometry/boxes.py
# !/usr/bin/env python3

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True, order=True)
class BoxF:
    """
    Axis-aligned box in float pixel coordinates, half-open corner convention:
    area = (xmax - xmin) * (ymax - ymin).
    """

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        for name in ("xmin", "ymin", "xmax", "ymax"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"Box coordinate {name} is not finite: {value}")
            object.__setattr__(self, name, value)
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise ValueError(f"Degenerate box {self.as_tuple()}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def intersection_area(self, other: "BoxF") -> float:
        w = min(self.xmax, other.xmax) - max(self.xmin, other.xmin)
        h = min(self.ymax, other.ymax) - max(self.ymin, other.ymin)
        if w <= 0.0 or h <= 0.0:
            return 0.0
        return w * h

    def scaled(self, factor: float) -> "BoxF":
        return BoxF(
            self.xmin * factor, self.ymin * factor, self.xmax * factor, self.ymax * factor
        )

    def translated(self, dx: float, dy: float) -> "BoxF":
        return BoxF(self.xmin + dx, self.ymin + dy, self.xmax + dx, self.ymax + dy)


@dataclass(frozen=True)
class Detection:
    box: BoxF
    class_id: int
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Detection score must lie in [0, 1], got {self.score}")
        if self.class_id < 0:
            raise ValueError(f"Detection class_id must be >= 0, got {self.class_id}")


def detection_sort_key(det: Detection):
    """Total order: score desc, then xmin, ymin, xmax, ymax, class ascending."""
    return (-det.score, det.box.xmin, det.box.ymin, det.box.xmax, det.box.ymax, det.class_id)


def iou(a: BoxF, b: BoxF) -> float:
    """Jaccard overlap of two boxes; 0 when they are disjoint."""
    inter = a.intersection_area(b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (A, 4) and (B, 4) corner arrays -> (A, B) float64."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(inter > 0.0, inter / np.where(union > 0.0, union, 1.0), 0.0)


def project_to_original(box: BoxF, origin_x: float, origin_y: float, scale: float) -> BoxF:
    """Maps a patch-frame box to original-image coordinates: (x + origin) / scale."""
    if scale <= 0.0:
        raise ValueError(f"Projection scale must be positive, got {scale}")
    return BoxF(
        (box.xmin + origin_x) / scale,
        (box.ymin + origin_y) / scale,
        (box.xmax + origin_x) / scale,
        (box.ymax + origin_y) / scale,
    )


def clip_to_image(box: BoxF, width: float, height: float) -> Optional[BoxF]:
    """Clamps a box to [0, width] x [0, height]; None when nothing is left."""
    if width <= 0 or height <= 0:
        raise ValueError(f"Clip bounds must be positive, got {width}x{height}")
    xmin = min(max(box.xmin, 0.0), width)
    ymin = min(max(box.ymin, 0.0), height)
    xmax = min(max(box.xmax, 0.0), width)
    ymax = min(max(box.ymax, 0.0), height)
    if xmax <= xmin or ymax <= ymin:
        return None
    return BoxF(xmin, ymin, xmax, ymax)
