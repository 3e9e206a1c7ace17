# sosdetect/synth/patches.py
# !/usr/bin/env python3

"""
Training-patch preparation.

Positive patches are centred on objects at every pyramid level where the
object is anchor-matchable. Co-visible objects are labelled only when more
than half of their area falls inside the patch. Background-only patches are
added at two per positive patch.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .._exceptions import AnnotationFormatError
from .._parallel import map_ordered
from .._random import make_rng
from ..anchors.anchors import AnchorSpec
from ..geometry.boxes import BoxF
from ..raster.ppm import read_ppm
from ..raster.pyramid import PyramidConfig, PyramidLevel, build_pyramid
from ..raster.tiler import extract_block
from .annotations import Annotation, LabeledBox

logger = logging.getLogger(__name__)

BACKGROUND_RATIO = 2
POSITIVE_COVERAGE = 0.5
_BACKGROUND_ATTEMPTS_PER_PATCH = 50


@dataclass(frozen=True)
class SampleProvenance:
    image_path: str
    level: int
    origin_x: int
    origin_y: int
    scale: float


@dataclass(frozen=True, eq=False)
class TrainingSample:
    """
    A side x side x 3 training patch with boxes in patch coordinates.

    `crop` records the (x, y, width, height) rectangle an augmentation cut from
    the source patch, or None for an unaugmented sample.
    """

    pixels: np.ndarray
    boxes: List[LabeledBox]
    provenance: SampleProvenance
    crop: Optional[Tuple[int, int, int, int]] = field(default=None)

    @property
    def is_background(self) -> bool:
        return not self.boxes


def _patch_rect(origin_x: int, origin_y: int, side: int) -> BoxF:
    return BoxF(origin_x, origin_y, origin_x + side, origin_y + side)


def label_patch(
    objects: Sequence[LabeledBox], scale: float, origin_x: int, origin_y: int, side: int
) -> List[LabeledBox]:
    """
    Labels for one patch: every object with more than half of its scaled area
    inside, clipped to the patch and shifted into patch coordinates.
    """
    rect = _patch_rect(origin_x, origin_y, side)
    labels = []
    for obj in objects:
        scaled = obj.box.scaled(scale)
        inside = scaled.intersection_area(rect)
        if inside <= POSITIVE_COVERAGE * scaled.area:
            continue
        clipped = BoxF(
            max(scaled.xmin, rect.xmin),
            max(scaled.ymin, rect.ymin),
            min(scaled.xmax, rect.xmax),
            min(scaled.ymax, rect.ymax),
        )
        labels.append(LabeledBox(obj.class_id, clipped.translated(-origin_x, -origin_y)))
    return labels


def _centered_origin(center: float, side: int, extent: int) -> int:
    origin = int(np.floor(center - side / 2.0 + 0.5))
    return int(min(max(origin, 0), max(extent - side, 0)))


def _check_bounds(annotation: Annotation, width: int, height: int) -> None:
    for obj in annotation.objects:
        box = obj.box
        if box.xmin < 0 or box.ymin < 0 or box.xmax > width or box.ymax > height:
            raise AnnotationFormatError(
                f"box {box.as_tuple()} of '{annotation.image_path}' lies outside "
                f"the {width}x{height} image"
            )


def _load_pyramid(
    annotation: Annotation, image_root: str, pyramid_cfg: PyramidConfig
) -> List[PyramidLevel]:
    image = read_ppm(os.path.join(image_root, annotation.image_path))
    _check_bounds(annotation, image.width, image.height)
    return build_pyramid(image, pyramid_cfg)


def _positive_samples(
    annotation: Annotation,
    levels: Sequence[PyramidLevel],
    anchor_spec: AnchorSpec,
) -> List[TrainingSample]:
    side = anchor_spec.input_side
    band_lo, band_hi = anchor_spec.matchable_band
    samples = []
    for level in levels:
        for obj in annotation.objects:
            scaled = obj.box.scaled(level.scale)
            longest = max(scaled.width, scaled.height)
            if not band_lo <= longest <= band_hi:
                continue
            cx, cy = scaled.center
            origin_x = _centered_origin(cx, side, level.image.width)
            origin_y = _centered_origin(cy, side, level.image.height)
            labels = label_patch(annotation.objects, level.scale, origin_x, origin_y, side)
            samples.append(
                TrainingSample(
                    pixels=extract_block(level.image.pixels, origin_x, origin_y, side, side),
                    boxes=labels,
                    provenance=SampleProvenance(
                        annotation.image_path, level.level, origin_x, origin_y, level.scale
                    ),
                )
            )
    return samples


def _touches_object(
    objects: Sequence[LabeledBox], scale: float, origin_x: int, origin_y: int, side: int
) -> bool:
    """True when any object's pixel footprint at this level reaches the patch."""
    for obj in objects:
        box = obj.box
        # Resampling can smear an object by one pixel at each edge.
        xmin = np.floor(box.xmin * scale) - 1
        ymin = np.floor(box.ymin * scale) - 1
        xmax = np.ceil(box.xmax * scale) + 1
        ymax = np.ceil(box.ymax * scale) + 1
        if (
            xmin < origin_x + side
            and origin_x < xmax
            and ymin < origin_y + side
            and origin_y < ymax
        ):
            return True
    return False


def _plan_backgrounds(
    annotations: Sequence[Annotation],
    level_sizes: Sequence[Sequence[Tuple[int, int, float]]],
    count: int,
    side: int,
    seed: int,
) -> List[Tuple[int, int, int, int]]:
    """Draws (image index, level, origin_x, origin_y) for background patches."""
    rng = make_rng(seed, 0)
    draws: List[Tuple[int, int, int, int]] = []
    attempts = 0
    budget = _BACKGROUND_ATTEMPTS_PER_PATCH * max(count, 1)
    while len(draws) < count and attempts < budget:
        attempts += 1
        image_index = int(rng.integers(0, len(annotations)))
        sizes = level_sizes[image_index]
        level = int(rng.integers(0, len(sizes)))
        width, height, scale = sizes[level]
        origin_x = int(rng.integers(0, max(width - side, 0) + 1))
        origin_y = int(rng.integers(0, max(height - side, 0) + 1))
        if _touches_object(annotations[image_index].objects, scale, origin_x, origin_y, side):
            continue
        draws.append((image_index, level, origin_x, origin_y))
    if len(draws) < count:
        logger.warning(
            f"Only {len(draws)} of {count} background patches found "
            f"after {attempts} attempts"
        )
    return draws


def prep_training_patches(
    annotations: Sequence[Annotation],
    image_root: str,
    pyramid_cfg: PyramidConfig,
    anchor_spec: AnchorSpec,
    seed: int,
    threads: int = 1,
) -> List[TrainingSample]:
    """
    Builds the training set: positives ordered by (image, level, object), then
    background-only patches numbering twice the positives (rounded down).
    """
    side = anchor_spec.input_side

    def positives_for(annotation: Annotation):
        levels = _load_pyramid(annotation, image_root, pyramid_cfg)
        sizes = [(lv.image.width, lv.image.height, lv.scale) for lv in levels]
        return _positive_samples(annotation, levels, anchor_spec), sizes

    results = map_ordered(positives_for, list(annotations), threads)
    positives = [sample for samples, _ in results for sample in samples]
    level_sizes = [sizes for _, sizes in results]

    background_count = BACKGROUND_RATIO * len(positives)
    draws = (
        _plan_backgrounds(annotations, level_sizes, background_count, side, seed)
        if annotations
        else []
    )

    by_image = {}
    for draw in draws:
        by_image.setdefault(draw[0], []).append(draw)

    def backgrounds_for(image_index: int):
        annotation = annotations[image_index]
        levels = _load_pyramid(annotation, image_root, pyramid_cfg)
        samples = []
        for _, level, origin_x, origin_y in by_image[image_index]:
            lv = levels[level]
            samples.append(
                TrainingSample(
                    pixels=extract_block(lv.image.pixels, origin_x, origin_y, side, side),
                    boxes=[],
                    provenance=SampleProvenance(
                        annotation.image_path, level, origin_x, origin_y, lv.scale
                    ),
                )
            )
        return samples

    background_images = sorted(by_image)
    background_lists = dict(
        zip(background_images, map_ordered(backgrounds_for, background_images, threads))
    )
    # Keep draw order so the sample list is independent of scheduling.
    cursor = {index: 0 for index in background_images}
    backgrounds = []
    for image_index, _, _, _ in draws:
        backgrounds.append(background_lists[image_index][cursor[image_index]])
        cursor[image_index] += 1

    logger.info(
        f"Prepared {len(positives)} positive and {len(backgrounds)} background patches "
        f"from {len(annotations)} images"
    )
    return positives + backgrounds
