# sosdetect/raster/pyramid.py
# !/usr/bin/env python3

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from .image import Image, bilinear_sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PyramidConfig:
    """
    ratio: down-sampling factor applied between consecutive levels.
    A level is kept while its area is at least stop_fraction * patch_side**2.
    """

    ratio: float = 0.5
    patch_side: int = 200
    stop_fraction: float = 0.4

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"Pyramid ratio must lie in (0, 1), got {self.ratio}")
        if self.stop_fraction <= 0.0:
            raise ValueError(
                f"Pyramid stop_fraction must be positive, got {self.stop_fraction}"
            )
        if self.patch_side < 8:
            raise ValueError(f"Pyramid patch_side must be >= 8, got {self.patch_side}")

    @property
    def min_area(self) -> float:
        return self.stop_fraction * self.patch_side * self.patch_side


@dataclass(frozen=True)
class PyramidLevel:
    level: int
    scale: float
    image: Image


def _box_halve(pixels: np.ndarray) -> np.ndarray:
    """2x2 box filter with round-half-up integer mean; odd edges are dropped."""
    height, width = pixels.shape[0] // 2, pixels.shape[1] // 2
    block = pixels[: height * 2, : width * 2].astype(np.uint16)
    total = (
        block[0::2, 0::2] + block[0::2, 1::2] + block[1::2, 0::2] + block[1::2, 1::2]
    )
    return ((total + 2) // 4).astype(np.uint8)


def downsample(image: Image, ratio: float) -> Image:
    """
    Shrinks an image to floor(w * ratio) x floor(h * ratio), each at least 1.

    ratio 0.5 uses an exact 2x2 box filter; any other ratio samples bilinearly at
    source coordinate (dst + 0.5) / ratio - 0.5.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"Down-sampling ratio must lie in (0, 1), got {ratio}")
    width = max(1, int(np.floor(image.width * ratio)))
    height = max(1, int(np.floor(image.height * ratio)))

    if ratio == 0.5 and image.width >= 2 and image.height >= 2:
        return Image(_box_halve(image.pixels))
    return Image(bilinear_sample(image.pixels, width, height, 1.0 / ratio, 1.0 / ratio))


def build_pyramid(image: Image, config: PyramidConfig) -> List[PyramidLevel]:
    """
    Builds the image pyramid. Level 0 is always the original image; further
    levels are appended while their area stays at or above the stop threshold.
    """
    levels = [PyramidLevel(level=0, scale=1.0, image=image)]
    current = image
    scale = 1.0
    while True:
        next_width = int(np.floor(current.width * config.ratio))
        next_height = int(np.floor(current.height * config.ratio))
        if next_width < 1 or next_height < 1:
            break
        if next_width * next_height < config.min_area:
            break
        current = downsample(current, config.ratio)
        scale *= config.ratio
        levels.append(PyramidLevel(level=len(levels), scale=scale, image=current))

    logger.debug(
        f"Built {len(levels)} pyramid levels from {image.width}x{image.height}: "
        + ", ".join(f"{lv.image.width}x{lv.image.height}" for lv in levels)
    )
    return levels
