# sosdetect/net/checkpoint.py
# !/usr/bin/env python3

"""
Bit-exact checkpoint files.

Layout (little-endian):
    b"SOSC" | u32 version | u32 json length | JSON metadata (UTF-8)
    then per tensor: u32 name length | name (UTF-8) | u32 rank | u32 dims... |
    raw float32 data
"""

import io
import json
import logging
import os
from collections import OrderedDict
from typing import BinaryIO, Union

import numpy as np

from .._exceptions import (
    CheckpointMagicError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigError,
)
from .._random import PRNG_NAME
from .model import DetectorModel, ModelConfig, parameter_shapes
from .net_utils import _read_exact, _read_uint32, _write_uint32

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SOSC"
CHECKPOINT_VERSION = 1
_FLOAT_LE = np.dtype("<f4")


def _metadata(model: DetectorModel) -> bytes:
    blob = {
        "model": model.config.to_dict(),
        "prng": PRNG_NAME,
        "seed": model.seed,
    }
    return json.dumps(blob, sort_keys=True, separators=(",", ":")).encode("utf-8")


def dump_checkpoint(model: DetectorModel, f: BinaryIO) -> None:
    f.write(CHECKPOINT_MAGIC)
    _write_uint32(f, CHECKPOINT_VERSION)
    meta = _metadata(model)
    _write_uint32(f, len(meta))
    f.write(meta)
    for name, value in model.params.items():
        encoded = name.encode("utf-8")
        _write_uint32(f, len(encoded))
        f.write(encoded)
        _write_uint32(f, value.ndim)
        for dim in value.shape:
            _write_uint32(f, dim)
        f.write(np.ascontiguousarray(value, dtype=_FLOAT_LE).tobytes())


def save_checkpoint(model: DetectorModel, path: Union[str, os.PathLike]) -> None:
    output_dir = os.path.dirname(os.fspath(path))
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    with open(path, "wb") as f:
        dump_checkpoint(model, f)
    logger.info(f"Checkpoint written to '{path}'")


def checkpoint_bytes(model: DetectorModel) -> bytes:
    buffer = io.BytesIO()
    dump_checkpoint(model, buffer)
    return buffer.getvalue()


def parse_checkpoint(f: BinaryIO) -> DetectorModel:
    magic = f.read(4)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointMagicError(f"Not a checkpoint: expected magic 'SOSC', got {magic!r}")
    version = _read_uint32(f, "version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"Unsupported checkpoint version {version}; expected {CHECKPOINT_VERSION}"
        )
    meta_length = _read_uint32(f, "metadata length")
    try:
        meta = json.loads(_read_exact(f, meta_length, "metadata").decode("utf-8"))
        config = ModelConfig.from_dict(meta["model"])
    except CheckpointTruncatedError:
        raise
    except (ValueError, KeyError, TypeError, ConfigError) as e:
        raise CheckpointShapeError(f"Invalid checkpoint metadata: {e}") from e

    expected = parameter_shapes(config)
    params: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, shape in expected.items():
        name_length = _read_uint32(f, f"name length of {name}")
        stored_name = _read_exact(f, name_length, "tensor name").decode("utf-8", "replace")
        if stored_name != name:
            raise CheckpointShapeError(
                f"Checkpoint tensor '{stored_name}' found where '{name}' was expected"
            )
        rank = _read_uint32(f, f"rank of {name}")
        dims = tuple(_read_uint32(f, f"dims of {name}") for _ in range(rank))
        if dims != shape:
            raise CheckpointShapeError(
                f"Tensor {name} has shape {dims} but the config requires {shape}"
            )
        count = int(np.prod(dims, dtype=np.int64))
        data = _read_exact(f, count * _FLOAT_LE.itemsize, f"data of {name}")
        params[name] = np.frombuffer(data, dtype=_FLOAT_LE).astype(np.float32).reshape(dims)

    trailing = f.read(1)
    if trailing:
        raise CheckpointShapeError("Checkpoint has data after the last expected tensor")
    return DetectorModel(config, params, meta.get("seed"))


def load_checkpoint(path: Union[str, os.PathLike]) -> DetectorModel:
    with open(path, "rb") as f:
        model = parse_checkpoint(f)
    logger.info(f"Loaded checkpoint '{path}' ({len(model.params)} tensors)")
    return model
