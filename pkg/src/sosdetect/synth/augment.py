# sosdetect/synth/augment.py
# !/usr/bin/env python3

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .._random import make_rng
from ..geometry.boxes import BoxF
from ..raster.image import Image, resize_bilinear
from .annotations import LabeledBox
from .patches import TrainingSample

logger = logging.getLogger(__name__)

KEEP_FRACTION = 0.7


@dataclass(frozen=True)
class AugmentConfig:
    min_scale: float = 0.5
    max_scale: float = 1.0
    min_aspect: float = 3.0 / 4.0
    max_aspect: float = 4.0 / 3.0
    keep_fraction: float = KEEP_FRACTION

    def __post_init__(self):
        if not 0.0 < self.min_scale <= self.max_scale <= 1.0:
            raise ValueError("Crop scale range must satisfy 0 < min <= max <= 1")
        if not 0.0 < self.min_aspect <= self.max_aspect:
            raise ValueError("Crop aspect range must satisfy 0 < min <= max")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must lie in (0, 1]")


def sample_crop(
    rng: np.random.Generator, side: int, config: AugmentConfig
) -> Tuple[int, int, int, int]:
    """Draws an (x, y, width, height) crop inside a side x side patch."""
    scale = rng.uniform(config.min_scale, config.max_scale)
    aspect = rng.uniform(config.min_aspect, config.max_aspect)
    width = int(min(max(round(side * scale * math.sqrt(aspect)), 1), side))
    height = int(min(max(round(side * scale / math.sqrt(aspect)), 1), side))
    x = int(rng.integers(0, side - width + 1))
    y = int(rng.integers(0, side - height + 1))
    return x, y, width, height


def crop_and_resize(
    sample: TrainingSample,
    crop: Tuple[int, int, int, int],
    keep_fraction: float = KEEP_FRACTION,
) -> TrainingSample:
    """
    Cuts `crop` out of the sample and rescales it back to the patch size.

    A box survives as its clipped remainder when at least `keep_fraction` of its
    area lies inside the crop.
    """
    side_y, side_x = sample.pixels.shape[:2]
    x, y, width, height = crop
    rect = BoxF(x, y, x + width, y + height)
    sx, sy = side_x / width, side_y / height

    boxes = []
    for obj in sample.boxes:
        inside = obj.box.intersection_area(rect)
        if inside < keep_fraction * obj.box.area:
            continue
        clipped = BoxF(
            (max(obj.box.xmin, rect.xmin) - x) * sx,
            (max(obj.box.ymin, rect.ymin) - y) * sy,
            (min(obj.box.xmax, rect.xmax) - x) * sx,
            (min(obj.box.ymax, rect.ymax) - y) * sy,
        )
        boxes.append(LabeledBox(obj.class_id, clipped))

    region = Image(sample.pixels[y : y + height, x : x + width])
    pixels = resize_bilinear(region, side_x, side_y).pixels
    return TrainingSample(
        pixels=pixels, boxes=boxes, provenance=sample.provenance, crop=tuple(crop)
    )


def augment(
    sample: TrainingSample, seed: int, config: AugmentConfig = AugmentConfig()
) -> TrainingSample:
    """Random crop with scale and aspect jitter, resized back to the patch size."""
    rng = make_rng(seed)
    crop = sample_crop(rng, sample.pixels.shape[0], config)
    augmented = crop_and_resize(sample, crop, config.keep_fraction)
    logger.debug(
        f"Augment crop {crop}: kept {len(augmented.boxes)} of {len(sample.boxes)} boxes"
    )
    return augmented
