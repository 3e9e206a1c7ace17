# sosdetect/raster/__init__.py
# !/usr/bin/env python3

"""
Raster images, P6 PPM I/O, image pyramids and sliding-window tiling.
"""

from .image import Image, resize_bilinear
from .ppm import decode_ppm, encode_ppm, read_ppm, write_ppm
from .pyramid import PyramidConfig, PyramidLevel, build_pyramid, downsample
from .tiler import Patch, TilerConfig, tile

__all__ = [
    "Image",
    "resize_bilinear",
    "decode_ppm",
    "encode_ppm",
    "read_ppm",
    "write_ppm",
    "PyramidConfig",
    "PyramidLevel",
    "build_pyramid",
    "downsample",
    "Patch",
    "TilerConfig",
    "tile",
]
