# sosdetect/detect/detector.py
# !/usr/bin/env python3

"""
Image-level inference.

    image -> pyramid -> patches -> batched forward -> per-(anchor, class)
    candidates above the score threshold -> decode in the patch frame ->
    project to the original image -> clip -> per-class NMS

Patches of one image are split into batches of `batch_size`; since every
sample runs through the network independently, the result does not depend on
how patches are batched or how many worker threads run the batches.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from .._exceptions import ConfigError
from .._parallel import map_ordered
from ..anchors.anchors import AnchorGrid, build_anchors, decode_boxes
from ..geometry.boxes import (
    BoxF,
    Detection,
    clip_to_image,
    detection_sort_key,
    project_to_original,
)
from ..geometry.nms import nms
from ..net.model import (
    DetectorModel,
    forward_detector,
    head_to_anchor_major,
    patches_to_tensor,
)
from ..net.net_utils import log_softmax
from ..raster.image import Image
from ..raster.pyramid import PyramidConfig, build_pyramid
from ..raster.tiler import Patch, TilerConfig, tile
from .levels import LevelSet, as_level_set

logger = logging.getLogger(__name__)

OPERATING_THRESHOLD = 0.5
CURVE_THRESHOLD = 0.01


@dataclass(frozen=True)
class DetectConfig:
    """
    score_threshold: candidates need a class probability strictly above it
        (0.5 operational, 0.01 when collecting detections for curves).
    levels: restrict inference to these pyramid levels; None uses all.
    """

    score_threshold: float = OPERATING_THRESHOLD
    nms_iou: float = 0.45
    batch_size: int = 16
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    tiler: TilerConfig = field(default_factory=TilerConfig)
    levels: Optional[LevelSet] = None

    def __post_init__(self):
        if not 0.0 <= self.score_threshold < 1.0:
            raise ValueError(f"score_threshold must lie in [0, 1), got {self.score_threshold}")
        if not 0.0 < self.nms_iou < 1.0:
            raise ValueError(f"nms_iou must lie in (0, 1), got {self.nms_iou}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.levels is not None and self.levels.is_empty:
            raise ValueError("An explicit level selection must not be empty")


def restrict_levels(
    config: DetectConfig, level_set: Union[LevelSet, Iterable[int]]
) -> DetectConfig:
    """Returns a copy of `config` that only runs on the selected pyramid levels."""
    selection = as_level_set(level_set)
    if selection.is_empty:
        raise ValueError("Level set must not be empty")
    return replace(config, levels=selection)


def batch_count(patch_count: int, batch_size: int) -> int:
    return math.ceil(patch_count / batch_size) if patch_count else 0


def _batch_candidates(
    model: DetectorModel,
    grid: AnchorGrid,
    batch: Sequence[np.ndarray],
    score_threshold: float,
) -> List[List[Detection]]:
    conf, loc = forward_detector(model, patches_to_tensor(batch))
    slots = grid.spec.boxes_per_cell
    probs = np.exp(log_softmax(head_to_anchor_major(conf, slots)))
    offsets = head_to_anchor_major(loc, slots).astype(np.float64)

    results = []
    for b in range(len(batch)):
        scores = probs[b, :, 1:]
        # Threshold 0 emits everything, including scores that underflowed to 0.
        if score_threshold > 0.0:
            above = scores > score_threshold
        else:
            above = np.ones(scores.shape, dtype=bool)
        # Row-major nonzero keeps (anchor, class) order.
        anchor_idx, class_idx = np.nonzero(above)
        boxes = decode_boxes(offsets[b, anchor_idx], grid.boxes[anchor_idx])
        valid = np.all(np.isfinite(boxes), axis=1) & (boxes[:, 2] > boxes[:, 0]) & (
            boxes[:, 3] > boxes[:, 1]
        )
        if not np.all(valid):
            logger.debug(f"Dropped {int(np.count_nonzero(~valid))} degenerate decoded boxes")
        results.append(
            [
                Detection(
                    box=BoxF(*(float(v) for v in boxes[i])),
                    class_id=int(class_idx[i]),
                    score=float(probs[b, anchor_idx[i], class_idx[i] + 1]),
                )
                for i in np.flatnonzero(valid)
            ]
        )
    return results


def detect_patches_batched(
    model: DetectorModel,
    patches: Sequence[Union[Patch, np.ndarray]],
    config: DetectConfig = DetectConfig(),
    threads: int = 1,
) -> List[List[Detection]]:
    """
    Raw candidates in each patch's own frame, one list per input patch.

    Patches are grouped into ceil(P / batch_size) consecutive batches; with
    threads > 1 batches run concurrently and are merged back in order.
    """
    pixels = [p.pixels if isinstance(p, Patch) else np.asarray(p) for p in patches]
    grid = build_anchors(model.config.anchor_spec)
    size = config.batch_size
    batches = [pixels[i : i + size] for i in range(0, len(pixels), size)]
    logger.debug(
        f"{len(pixels)} patches in {batch_count(len(pixels), size)} batches of up to {size}"
    )
    per_batch = map_ordered(
        lambda batch: _batch_candidates(model, grid, batch, config.score_threshold),
        batches,
        threads,
    )
    return [dets for batch in per_batch for dets in batch]


def _check_geometry(model: DetectorModel, config: DetectConfig) -> None:
    side = model.config.anchor_spec.input_side
    if (config.tiler.patch_width, config.tiler.patch_height) != (side, side):
        raise ConfigError(
            f"Tiler patches {config.tiler.patch_width}x{config.tiler.patch_height} "
            f"do not match the detector input {side}x{side}"
        )


def image_patches(image: Image, config: DetectConfig) -> List[Patch]:
    """All patches of the selected pyramid levels, level by level in row-major order."""
    patches: List[Patch] = []
    for level in build_pyramid(image, config.pyramid):
        if config.levels is not None and not config.levels.includes(level.level):
            continue
        patches.extend(tile(level, config.tiler))
    return patches


def detect_image_candidates(
    model: DetectorModel,
    image: Image,
    config: DetectConfig = DetectConfig(),
    threads: int = 1,
) -> List[Detection]:
    """Projected, clipped candidates of every selected level before NMS, sorted."""
    _check_geometry(model, config)
    patches = image_patches(image, config)
    per_patch = detect_patches_batched(model, patches, config, threads)

    candidates: List[Detection] = []
    dropped = 0
    for patch, dets in zip(patches, per_patch):
        for det in dets:
            box = project_to_original(det.box, patch.origin_x, patch.origin_y, patch.scale)
            box = clip_to_image(box, image.width, image.height)
            if box is None:
                dropped += 1
                continue
            candidates.append(Detection(box=box, class_id=det.class_id, score=det.score))
    if dropped:
        logger.debug(f"Dropped {dropped} candidates that clip to nothing")
    candidates.sort(key=detection_sort_key)
    logger.debug(
        f"{image.width}x{image.height} image: {len(patches)} patches, "
        f"{len(candidates)} candidates"
    )
    return candidates


def detect_image(
    model: DetectorModel,
    image: Image,
    config: DetectConfig = DetectConfig(),
    threads: int = 1,
) -> List[Detection]:
    """Final detections in original-image coordinates, in the deterministic total order."""
    return nms(detect_image_candidates(model, image, config, threads), config.nms_iou)
