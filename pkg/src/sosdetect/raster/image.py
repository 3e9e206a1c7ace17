# sosdetect/raster/image.py
# !/usr/bin/env python3

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

CHANNELS = 3


@dataclass(frozen=True, eq=False)
class Image:
    """
    An 8-bit RGB raster.

    `pixels` is a read-only uint8 array of shape (height, width, 3), which is the
    row-major interleaved layout of a P6 payload.
    """

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != CHANNELS:
            raise ValueError(
                f"Image pixels must have shape (height, width, 3), got {pixels.shape}"
            )
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError(f"Image must be at least 1x1, got {pixels.shape[:2]}")
        if pixels.flags.writeable:
            pixels = pixels.copy()
            pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def channels(self) -> int:
        return CHANNELS

    @property
    def area(self) -> int:
        return self.width * self.height

    @classmethod
    def blank(cls, width: int, height: int, value: int = 0) -> "Image":
        return cls(np.full((height, width, CHANNELS), value, dtype=np.uint8))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Image(width={self.width}, height={self.height})"


def _bilinear_axis(out_size: int, in_size: int, step: float):
    """Source indices and weights for one axis; coordinates are clamped."""
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * step - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, in_size - 1)
    frac = src - lo
    return lo, hi, frac


def bilinear_sample(
    pixels: np.ndarray, out_width: int, out_height: int, step_x: float, step_y: float
) -> np.ndarray:
    """
    Samples `pixels` (H, W, C) on an output grid where output pixel `d` reads
    source coordinate (d + 0.5) * step - 0.5. Returns rounded uint8 samples.
    """
    in_height, in_width = pixels.shape[:2]
    y0, y1, fy = _bilinear_axis(out_height, in_height, step_y)
    x0, x1, fx = _bilinear_axis(out_width, in_width, step_x)
    src = pixels.astype(np.float64)
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    fy = fy[:, None, None]
    out = top * (1.0 - fy) + bottom * fy
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def resize_bilinear(image: Image, width: int, height: int) -> Image:
    """Resizes an image to width x height with clamped bilinear sampling."""
    if width < 1 or height < 1:
        raise ValueError(f"Target size must be positive, got {width}x{height}")
    if width == image.width and height == image.height:
        return image
    return Image(
        bilinear_sample(
            image.pixels,
            width,
            height,
            image.width / width,
            image.height / height,
        )
    )
