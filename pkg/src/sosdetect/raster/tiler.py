# sosdetect/raster/tiler.py
# !/usr/bin/env python3

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from .image import CHANNELS
from .pyramid import PyramidLevel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TilerConfig:
    patch_width: int = 200
    patch_height: int = 200
    stride: int = 180

    def __post_init__(self):
        if self.patch_width < 1 or self.patch_height < 1:
            raise ValueError("Patch dimensions must be positive")
        if not 0 < self.stride <= min(self.patch_width, self.patch_height):
            raise ValueError(
                f"Stride must lie in (0, {min(self.patch_width, self.patch_height)}],"
                f" got {self.stride}"
            )


@dataclass(frozen=True, eq=False)
class Patch:
    """
    A fixed-size W x H x 3 block cut from one pyramid level.

    origin_x/origin_y are in level coordinates and `scale` is the level's
    scale, which is all that is needed to project boxes back.
    """

    level: int
    origin_x: int
    origin_y: int
    scale: float
    pixels: np.ndarray

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])


def extract_block(
    pixels: np.ndarray, origin_x: int, origin_y: int, width: int, height: int
) -> np.ndarray:
    """Copies a width x height block at the origin, zero-filling outside the image."""
    block = np.zeros((height, width, CHANNELS), dtype=np.uint8)
    src_h, src_w = pixels.shape[:2]
    x0, y0 = max(origin_x, 0), max(origin_y, 0)
    x1, y1 = min(origin_x + width, src_w), min(origin_y + height, src_h)
    if x1 > x0 and y1 > y0:
        block[y0 - origin_y : y1 - origin_y, x0 - origin_x : x1 - origin_x] = pixels[
            y0:y1, x0:x1
        ]
    block.flags.writeable = False
    return block


def tile_origins(width: int, height: int, config: TilerConfig) -> List[tuple]:
    """
    Row-major (origin_x, origin_y) pairs for one level.

    Columns run at every stride multiple inside the image and the last one may be
    zero-padded. Rows that would overhang are discarded, except that an image
    shorter than one patch keeps a single padded row.
    """
    xs = list(range(0, width, config.stride))
    if height < config.patch_height:
        ys = [0]
    else:
        ys = [
            y for y in range(0, height, config.stride) if y + config.patch_height <= height
        ]
    return [(x, y) for y in ys for x in xs]


def tile(level: PyramidLevel, config: TilerConfig) -> List[Patch]:
    """Cuts a pyramid level into fixed-size patches in row-major order."""
    pixels = level.image.pixels
    patches = [
        Patch(
            level=level.level,
            origin_x=x,
            origin_y=y,
            scale=level.scale,
            pixels=extract_block(pixels, x, y, config.patch_width, config.patch_height),
        )
        for x, y in tile_origins(level.image.width, level.image.height, config)
    ]
    logger.debug(
        f"Level {level.level} ({level.image.width}x{level.image.height}): "
        f"{len(patches)} patches"
    )
    return patches
