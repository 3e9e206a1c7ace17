# sosdetect/synth/annotations.py
# !/usr/bin/env python3

"""
JSON-lines annotation files.

One record per image:
    {"image": "<relative path>", "boxes": [{"class": 0, "xmin": 1, ...}, ...]}
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Sequence, Union

from .._exceptions import AnnotationFormatError
from ..geometry.boxes import BoxF

logger = logging.getLogger(__name__)

_BOX_KEYS = ("xmin", "ymin", "xmax", "ymax")


class LabeledBox(NamedTuple):
    class_id: int
    box: BoxF


@dataclass(frozen=True)
class Annotation:
    image_path: str
    objects: List[LabeledBox] = field(default_factory=list)


def _number(value: Any) -> Union[int, float]:
    """Keeps integral coordinates integral in the written JSON."""
    value = float(value)
    return int(value) if value.is_integer() else value


def annotation_to_record(annotation: Annotation) -> Dict[str, Any]:
    return {
        "image": annotation.image_path,
        "boxes": [
            {
                "class": int(obj.class_id),
                "xmin": _number(obj.box.xmin),
                "ymin": _number(obj.box.ymin),
                "xmax": _number(obj.box.xmax),
                "ymax": _number(obj.box.ymax),
            }
            for obj in annotation.objects
        ],
    }


def _parse_box(entry: Any, line_number: int) -> LabeledBox:
    if not isinstance(entry, dict):
        raise AnnotationFormatError("box entry is not an object", line_number)
    for key in ("class",) + _BOX_KEYS:
        if key not in entry:
            raise AnnotationFormatError(f"box entry is missing '{key}'", line_number)
    class_id = entry["class"]
    if isinstance(class_id, bool) or not isinstance(class_id, int) or class_id < 0:
        raise AnnotationFormatError(f"invalid class id {class_id!r}", line_number)
    coords = []
    for key in _BOX_KEYS:
        value = entry[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise AnnotationFormatError(f"'{key}' is not a number", line_number)
        if not math.isfinite(value):
            raise AnnotationFormatError(f"'{key}' is not finite", line_number)
        coords.append(float(value))
    try:
        box = BoxF(*coords)
    except ValueError as e:
        raise AnnotationFormatError(str(e), line_number) from e
    return LabeledBox(class_id, box)


def parse_annotation_line(line: str, line_number: int) -> Annotation:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise AnnotationFormatError(f"malformed JSON: {e.msg}", line_number) from e
    if not isinstance(record, dict):
        raise AnnotationFormatError("record is not a JSON object", line_number)
    for key in ("image", "boxes"):
        if key not in record:
            raise AnnotationFormatError(f"record is missing '{key}'", line_number)
    if not isinstance(record["image"], str) or not isinstance(record["boxes"], list):
        raise AnnotationFormatError("'image' must be a string, 'boxes' a list", line_number)
    return Annotation(
        image_path=record["image"],
        objects=[_parse_box(entry, line_number) for entry in record["boxes"]],
    )


def read_annotations(path: Union[str, os.PathLike]) -> List[Annotation]:
    """Reads a JSON-lines annotation file; blank lines are skipped."""
    annotations = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            annotations.append(parse_annotation_line(line, line_number))
    logger.info(f"Read {len(annotations)} annotations from '{path}'")
    return annotations


def write_annotations(path: Union[str, os.PathLike], annotations: Sequence[Annotation]) -> None:
    output_dir = os.path.dirname(os.fspath(path))
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for annotation in annotations:
            f.write(json.dumps(annotation_to_record(annotation), ensure_ascii=False))
            f.write("\n")
