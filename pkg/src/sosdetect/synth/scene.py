# sosdetect/synth/scene.py
# !/usr/bin/env python3

"""
Synthetic sign scenes: a noisy grey background with class-coded geometric
signs placed at non-overlapping positions.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .._random import make_rng
from ..geometry.boxes import BoxF
from ..matrices.class_matrix import MAX_CLASSES, get_class_style
from ..raster.image import Image
from .annotations import Annotation, LabeledBox

logger = logging.getLogger(__name__)

_PLACEMENT_ATTEMPTS = 200
_SIGN_GAP = 2


@dataclass(frozen=True)
class SceneSpec:
    image_side: int = 512
    class_count: int = 5
    signs_per_image: Tuple[int, int] = (1, 4)
    sign_side_range: Tuple[int, int] = (10, 160)
    background_noise: int = 24
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "signs_per_image", tuple(self.signs_per_image))
        object.__setattr__(self, "sign_side_range", tuple(self.sign_side_range))
        if not 1 <= self.class_count <= MAX_CLASSES:
            raise ValueError(f"class_count must lie in [1, {MAX_CLASSES}]")
        lo, hi = self.signs_per_image
        if not 0 <= lo <= hi:
            raise ValueError(f"Invalid signs_per_image range {self.signs_per_image}")
        lo, hi = self.sign_side_range
        if not 3 <= lo <= hi <= self.image_side:
            raise ValueError(
                f"sign_side_range {self.sign_side_range} must fit in "
                f"image_side {self.image_side}"
            )
        if not 0 <= self.background_noise <= 127:
            raise ValueError("background_noise must lie in [0, 127]")


def scene_filename(index: int) -> str:
    return f"scene_{index:05d}.ppm"


def shape_mask(shape: str, side: int) -> np.ndarray:
    """Boolean side x side mask of a shape, sampled at pixel centres."""
    u = (np.arange(side, dtype=np.float64) + 0.5) / side - 0.5
    x, y = np.meshgrid(u, u, indexing="xy")
    if shape == "disk":
        return x * x + y * y <= 0.25
    if shape == "square":
        return np.ones((side, side), dtype=bool)
    if shape == "triangle":
        # Apex at top centre, base along the bottom edge.
        return np.abs(x) <= (y + 0.5) / 2.0
    if shape == "diamond":
        return np.abs(x) + np.abs(y) <= 0.5
    if shape == "ring":
        r2 = x * x + y * y
        return (r2 <= 0.25) & (r2 >= 0.09)
    raise ValueError(f"Unknown shape '{shape}'")


def _place_signs(
    rng: np.random.Generator, spec: SceneSpec, count: int
) -> List[Tuple[int, int, int]]:
    """Draws (x, y, side) placements whose squares keep a small gap."""
    placed: List[Tuple[int, int, int]] = []
    lo, hi = spec.sign_side_range
    for _ in range(count):
        for _attempt in range(_PLACEMENT_ATTEMPTS):
            side = int(rng.integers(lo, hi + 1))
            x = int(rng.integers(0, spec.image_side - side + 1))
            y = int(rng.integers(0, spec.image_side - side + 1))
            if all(
                x + side + _SIGN_GAP <= px
                or px + ps + _SIGN_GAP <= x
                or y + side + _SIGN_GAP <= py
                or py + ps + _SIGN_GAP <= y
                for px, py, ps in placed
            ):
                placed.append((x, y, side))
                break
        else:
            logger.warning(
                f"Could not place sign {len(placed) + 1} of {count} without overlap"
            )
            break
    return placed


def generate_scene(spec: SceneSpec, index: int) -> Tuple[Image, Annotation]:
    """
    Renders scene `index`. The result depends only on (spec.seed, index), and
    every annotated box is the tight bounding box of the rendered shape.
    """
    rng = make_rng(spec.seed, index)
    side = spec.image_side
    base = int(rng.integers(90, 171))
    canvas = np.full((side, side, 3), base, dtype=np.int16)

    lo, hi = spec.signs_per_image
    count = int(rng.integers(lo, hi + 1))
    objects = []
    for x, y, sign_side in _place_signs(rng, spec, count):
        class_id = int(rng.integers(0, spec.class_count))
        shape, colour = get_class_style(class_id)
        mask = shape_mask(shape, sign_side)
        canvas[y : y + sign_side, x : x + sign_side][mask] = colour

        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        box = BoxF(x + cols[0], y + rows[0], x + cols[-1] + 1, y + rows[-1] + 1)
        objects.append(LabeledBox(class_id, box))

    if spec.background_noise > 0:
        noise = rng.integers(
            -spec.background_noise, spec.background_noise + 1, size=canvas.shape
        )
        canvas += noise.astype(np.int16)
    pixels = np.clip(canvas, 0, 255).astype(np.uint8)

    logger.debug(f"Scene {index}: {len(objects)} signs")
    return Image(pixels), Annotation(image_path=scene_filename(index), objects=objects)
