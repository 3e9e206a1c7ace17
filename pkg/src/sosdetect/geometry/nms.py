# sosdetect/geometry/nms.py
# !/usr/bin/env python3

import logging
from typing import Dict, List, Sequence

import numpy as np

from .boxes import Detection, detection_sort_key, iou_matrix

logger = logging.getLogger(__name__)

NMS_BLOCK = 256
_SUPPRESS_CHUNK = 8192


def _greedy_keep(
    boxes: np.ndarray, iou_threshold: float, block: int = NMS_BLOCK
) -> List[int]:
    """
    Greedy suppression over boxes already in priority order.

    Works through the boxes one block at a time: greedy inside the block, then
    the block's survivors suppress every later box in one vectorised pass.
    """
    count = len(boxes)
    suppressed = np.zeros(count, dtype=bool)
    keep: List[int] = []
    for start in range(0, count, block):
        stop = min(start + block, count)
        live = start + np.flatnonzero(~suppressed[start:stop])
        if live.size == 0:
            continue
        overlaps = iou_matrix(boxes[live], boxes[live])
        block_keep: List[int] = []
        for j in range(live.size):
            if block_keep and np.any(overlaps[j, block_keep] > iou_threshold):
                continue
            block_keep.append(j)
        survivors = live[block_keep]
        keep.extend(int(i) for i in survivors)

        later = stop + np.flatnonzero(~suppressed[stop:])
        for first in range(0, later.size, _SUPPRESS_CHUNK):
            chunk = later[first : first + _SUPPRESS_CHUNK]
            hit = np.any(iou_matrix(boxes[survivors], boxes[chunk]) > iou_threshold, axis=0)
            suppressed[chunk[hit]] = True
    return keep


def nms(detections: Sequence[Detection], iou_threshold: float = 0.45) -> List[Detection]:
    """
    Per-class greedy non-maximum suppression.

    Boxes of different classes never suppress each other. Input order does not
    matter: candidates are ranked by `detection_sort_key`, and the output follows
    the same order.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"NMS IoU threshold must lie in (0, 1), got {iou_threshold}")

    by_class: Dict[int, List[Detection]] = {}
    for det in sorted(detections, key=detection_sort_key):
        by_class.setdefault(det.class_id, []).append(det)

    kept: List[Detection] = []
    for class_id, dets in by_class.items():
        boxes = np.array([d.box.as_tuple() for d in dets], dtype=np.float64)
        kept.extend(dets[i] for i in _greedy_keep(boxes, iou_threshold))
    logger.debug(f"NMS kept {len(kept)} of {len(detections)} detections")
    return sorted(kept, key=detection_sort_key)
