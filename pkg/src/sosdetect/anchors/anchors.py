# sosdetect/anchors/anchors.py
# !/usr/bin/env python3

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..geometry.boxes import BoxF

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnchorSpec:
    """
    Default-box geometry for one square input.

    Each feature-map cell carries two squares (s1, s2) followed by one box per
    aspect ratio R of width s1*sqrt(R) and height s1/sqrt(R).
    """

    input_side: int = 200
    feature_side: int = 25
    aspect_ratios: Tuple[float, ...] = (2.0, 3.0, 1.0 / 2.0, 1.0 / 3.0)

    def __post_init__(self):
        if self.feature_side < 1 or self.input_side % self.feature_side != 0:
            raise ValueError(
                f"input_side {self.input_side} must be a multiple of "
                f"feature_side {self.feature_side}"
            )
        object.__setattr__(self, "aspect_ratios", tuple(float(r) for r in self.aspect_ratios))
        if any(r <= 0.0 for r in self.aspect_ratios):
            raise ValueError(f"Aspect ratios must be positive: {self.aspect_ratios}")

    @property
    def cell_stride(self) -> int:
        return self.input_side // self.feature_side

    @property
    def s1(self) -> float:
        return 0.1 * self.input_side

    @property
    def s2(self) -> float:
        return math.sqrt((0.1 * self.input_side) * (0.2 * self.input_side))

    @property
    def boxes_per_cell(self) -> int:
        return 2 + len(self.aspect_ratios)

    @property
    def anchor_count(self) -> int:
        return self.boxes_per_cell * self.feature_side * self.feature_side

    @property
    def matchable_band(self) -> Tuple[float, float]:
        """Longest-side range [s1/sqrt(2), 2*sqrt(2)*s1] an anchor can reach at IoU 0.5."""
        return self.s1 / math.sqrt(2.0), 2.0 * math.sqrt(2.0) * self.s1

    def cell_shapes(self) -> np.ndarray:
        """(boxes_per_cell, 2) array of (width, height) in cell order."""
        shapes = [(self.s1, self.s1), (self.s2, self.s2)]
        for r in self.aspect_ratios:
            shapes.append((self.s1 * math.sqrt(r), self.s1 / math.sqrt(r)))
        return np.array(shapes, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class AnchorGrid:
    """
    boxes: (anchor_count, 4) corner coordinates in patch pixels, ordered by
    row-major cell (i, j) and then by the per-cell slot order of AnchorSpec.
    """

    spec: AnchorSpec
    boxes: np.ndarray

    def __len__(self) -> int:
        return int(self.boxes.shape[0])

    def box(self, index: int) -> BoxF:
        return BoxF(*self.boxes[index])


def build_anchors(spec: AnchorSpec) -> AnchorGrid:
    """Lays out the unclipped default boxes centred on every cell centre."""
    stride = spec.cell_stride
    centers = (np.arange(spec.feature_side, dtype=np.float64) + 0.5) * stride
    cy, cx = np.meshgrid(centers, centers, indexing="ij")
    shapes = spec.cell_shapes()

    cx = cx.reshape(-1, 1)
    cy = cy.reshape(-1, 1)
    half_w = shapes[None, :, 0] / 2.0
    half_h = shapes[None, :, 1] / 2.0
    boxes = np.stack([cx - half_w, cy - half_h, cx + half_w, cy + half_h], axis=-1)
    boxes = boxes.reshape(-1, 4)
    boxes.flags.writeable = False
    logger.debug(f"Built {len(boxes)} default boxes on a {spec.feature_side}^2 grid")
    return AnchorGrid(spec=spec, boxes=boxes)


def _center_form(boxes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    w = boxes[..., 2] - boxes[..., 0]
    h = boxes[..., 3] - boxes[..., 1]
    return boxes[..., 0] + w / 2.0, boxes[..., 1] + h / 2.0, w, h


def encode_boxes(gt: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Row-wise (dcx, dcy, dw, dh) of gt (N, 4) relative to anchors (N, 4)."""
    gcx, gcy, gw, gh = _center_form(np.asarray(gt, dtype=np.float64))
    acx, acy, aw, ah = _center_form(np.asarray(anchors, dtype=np.float64))
    return np.stack(
        [(gcx - acx) / aw, (gcy - acy) / ah, np.log(gw / aw), np.log(gh / ah)], axis=-1
    )


def decode_boxes(offsets: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Inverse of encode_boxes; returns corner form (N, 4) float64."""
    offsets = np.asarray(offsets, dtype=np.float64)
    acx, acy, aw, ah = _center_form(np.asarray(anchors, dtype=np.float64))
    cx = offsets[..., 0] * aw + acx
    cy = offsets[..., 1] * ah + acy
    w = aw * np.exp(offsets[..., 2])
    h = ah * np.exp(offsets[..., 3])
    return np.stack([cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0], axis=-1)


def encode(gt: BoxF, anchor: BoxF) -> Tuple[float, float, float, float]:
    offsets = encode_boxes(np.array([gt.as_tuple()]), np.array([anchor.as_tuple()]))[0]
    return tuple(float(v) for v in offsets)


def decode(offsets, anchor: BoxF) -> BoxF:
    box = decode_boxes(np.array([offsets], dtype=np.float64), np.array([anchor.as_tuple()]))
    return BoxF(*box[0])
