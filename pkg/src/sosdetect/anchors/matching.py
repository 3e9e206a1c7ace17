# sosdetect/anchors/matching.py
# !/usr/bin/env python3

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geometry.boxes import BoxF, iou_matrix
from .anchors import AnchorGrid

logger = logging.getLogger(__name__)

BACKGROUND = -1


@dataclass(frozen=True, eq=False)
class MatchResult:
    """
    assignment[k] is the ground-truth index matched to anchor k, or BACKGROUND.
    """

    assignment: np.ndarray

    @property
    def matched_count(self) -> int:
        return int(np.count_nonzero(self.assignment != BACKGROUND))

    @property
    def positive_mask(self) -> np.ndarray:
        return self.assignment != BACKGROUND


def match(gt_boxes: Sequence[BoxF], grid: AnchorGrid, threshold: float = 0.5) -> MatchResult:
    """
    Assigns each anchor whose best overlap is strictly above `threshold` to that
    ground truth; ties go to the lowest gt index. No anchor is forced to match.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"Match threshold must lie in (0, 1), got {threshold}")

    assignment = np.full(len(grid), BACKGROUND, dtype=np.int64)
    if len(gt_boxes) == 0:
        return MatchResult(assignment=assignment)

    gt = np.array([b.as_tuple() for b in gt_boxes], dtype=np.float64)
    overlaps = iou_matrix(grid.boxes, gt)
    best_gt = np.argmax(overlaps, axis=1)
    best_iou = overlaps[np.arange(len(grid)), best_gt]
    matched = best_iou > threshold
    assignment[matched] = best_gt[matched]
    return MatchResult(assignment=assignment)
