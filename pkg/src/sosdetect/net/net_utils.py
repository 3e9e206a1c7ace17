# sosdetect/net/net_utils.py
# !/usr/bin/env python3

import logging
import struct
from typing import BinaryIO

import numpy as np

from .._exceptions import CheckpointTruncatedError, NumericalError

logger = logging.getLogger(__name__)

KERNEL = 3


def im2col_3x3(x: np.ndarray) -> np.ndarray:
    """
    Unfolds one zero-padded (C, H, W) sample into (C * 9, H * W) columns whose
    row order matches a (C, 3, 3) kernel flattened row-major.
    """
    channels, height, width = x.shape
    padded = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (KERNEL, KERNEL), axis=(1, 2))
    # windows: (C, H, W, 3, 3) -> (C, 3, 3, H, W)
    return np.ascontiguousarray(windows.transpose(0, 3, 4, 1, 2)).reshape(
        channels * KERNEL * KERNEL, height * width
    )


def col2im_3x3(cols: np.ndarray, channels: int, height: int, width: int) -> np.ndarray:
    """Adjoint of im2col_3x3: folds (C * 9, H * W) columns back onto (C, H, W)."""
    cols = cols.reshape(channels, KERNEL, KERNEL, height, width)
    padded = np.zeros((channels, height + 2, width + 2), dtype=cols.dtype)
    for ky in range(KERNEL):
        for kx in range(KERNEL):
            padded[:, ky : ky + height, kx : kx + width] += cols[:, ky, kx]
    return padded[:, 1:-1, 1:-1]


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax over the last axis, in float64."""
    z = np.asarray(logits, dtype=np.float64)
    m = np.max(z, axis=-1, keepdims=True)
    return z - (m + np.log(np.sum(np.exp(z - m), axis=-1, keepdims=True)))


def check_finite(name: str, array: np.ndarray) -> None:
    if not np.all(np.isfinite(array)):
        bad = int(np.count_nonzero(~np.isfinite(array)))
        raise NumericalError(f"{name} contains {bad} non-finite values")


def _read_exact(f: BinaryIO, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) < size:
        raise CheckpointTruncatedError(
            f"Checkpoint truncated while reading {what}: "
            f"expected {size} bytes, got {len(data)}"
        )
    return data


def _read_uint32(f: BinaryIO, what: str) -> int:
    return struct.unpack("<I", _read_exact(f, 4, what))[0]


def _write_uint32(f: BinaryIO, value: int) -> None:
    f.write(struct.pack("<I", value))
