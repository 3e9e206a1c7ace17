# sosdetect/anchors/__init__.py
# !/usr/bin/env python3

"""
Default-box lattice, offset encoding and ground-truth matching.
"""

from .anchors import (
    AnchorGrid,
    AnchorSpec,
    build_anchors,
    decode,
    decode_boxes,
    encode,
    encode_boxes,
)
from .matching import BACKGROUND, MatchResult, match

__all__ = [
    "AnchorGrid",
    "AnchorSpec",
    "build_anchors",
    "decode",
    "decode_boxes",
    "encode",
    "encode_boxes",
    "BACKGROUND",
    "MatchResult",
    "match",
]
