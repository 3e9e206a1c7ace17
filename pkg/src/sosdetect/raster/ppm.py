# sosdetect/raster/ppm.py
# !/usr/bin/env python3

"""
Binary P6 PPM codec.

Only maxval 255 is accepted. `encode_ppm` always emits the canonical header
"P6\\n<w> <h>\\n255\\n", so `encode_ppm(decode_ppm(b)) == b` for canonical input.
"""

import logging
import os
from typing import Tuple, Union

import numpy as np

from .._exceptions import (
    ImageReadError,
    PpmHeaderError,
    PpmMagicError,
    PpmMaxvalError,
    PpmParseError,
    PpmTruncatedError,
)
from .image import CHANNELS, Image

logger = logging.getLogger(__name__)

PPM_MAGIC = b"P6"
PPM_MAXVAL = 255
_WHITESPACE = b" \t\n\r\x0b\x0c"


def _read_header_token(data: bytes, pos: int) -> Tuple[bytes, int]:
    """Skips whitespace and comments, then reads one header token."""
    while pos < len(data):
        byte = data[pos : pos + 1]
        if byte in _WHITESPACE:
            pos += 1
        elif byte == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos : pos + 1] not in _WHITESPACE:
        pos += 1
    if start == pos:
        raise PpmHeaderError("PPM header ended before all fields were read")
    return data[start:pos], pos


def _read_header_int(data: bytes, pos: int, field: str) -> Tuple[int, int]:
    token, pos = _read_header_token(data, pos)
    if not token.isdigit():
        raise PpmHeaderError(f"PPM {field} is not a decimal integer: {token!r}")
    return int(token), pos


def decode_ppm(data: bytes) -> Image:
    """Decodes a binary P6 PPM with maxval 255 into an Image."""
    if data[:2] != PPM_MAGIC:
        raise PpmMagicError(f"Not a binary PPM: expected magic 'P6', got {data[:2]!r}")
    pos = 2
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE + b"#":
        raise PpmHeaderError("PPM magic must be followed by whitespace")

    width, pos = _read_header_int(data, pos, "width")
    height, pos = _read_header_int(data, pos, "height")
    maxval, pos = _read_header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PpmHeaderError(f"PPM dimensions must be positive, got {width}x{height}")
    if maxval != PPM_MAXVAL:
        raise PpmMaxvalError(f"Unsupported PPM maxval {maxval}; only 255 is accepted")

    # Exactly one whitespace byte separates the header from the raster.
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise PpmTruncatedError("PPM header is not followed by a raster payload")
    pos += 1

    expected = width * height * CHANNELS
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise PpmTruncatedError(
            f"PPM payload truncated: expected {expected} bytes, got {len(payload)}"
        )
    if len(data) > pos + expected:
        logger.debug(f"Ignoring {len(data) - pos - expected} trailing bytes in PPM")

    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, CHANNELS)
    return Image(pixels)


def encode_ppm(image: Image) -> bytes:
    """Encodes an Image as canonical P6 bytes."""
    header = f"P6\n{image.width} {image.height}\n{PPM_MAXVAL}\n".encode("ascii")
    return header + image.pixels.tobytes()


def read_ppm(path: Union[str, os.PathLike]) -> Image:
    """Reads a PPM file; I/O and format failures become ImageReadError."""
    try:
        with open(path, "rb") as f:
            return decode_ppm(f.read())
    except OSError as e:
        raise ImageReadError(str(path), str(e)) from e
    except PpmParseError as e:
        raise ImageReadError(str(path), str(e)) from e


def write_ppm(path: Union[str, os.PathLike], image: Image) -> None:
    output_dir = os.path.dirname(os.fspath(path))
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    with open(path, "wb") as f:
        f.write(encode_ppm(image))
