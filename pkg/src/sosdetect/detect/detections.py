# sosdetect/detect/detections.py
# !/usr/bin/env python3

"""
JSON-lines detection files, one detection per line:
    {"image": "<path>", "class": 0, "score": 0.97,
     "xmin": 1.5, "ymin": 2.0, "xmax": 30.25, "ymax": 41.0}
"""

import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .._exceptions import AnnotationFormatError
from ..geometry.boxes import BoxF, Detection

logger = logging.getLogger(__name__)

_FIELDS = ("image", "class", "score", "xmin", "ymin", "xmax", "ymax")


def detection_to_record(image: str, det: Detection) -> Dict[str, Any]:
    return {
        "image": image,
        "class": int(det.class_id),
        "score": float(det.score),
        "xmin": float(det.box.xmin),
        "ymin": float(det.box.ymin),
        "xmax": float(det.box.xmax),
        "ymax": float(det.box.ymax),
    }


def parse_detection_line(
    line: str, line_number: int, class_count: Optional[int] = None
) -> Tuple[str, Detection]:
    """Parses one record; with `class_count` K the class must lie in [0, K)."""
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise AnnotationFormatError(f"invalid JSON ({e.msg})", line_number)
    if not isinstance(record, dict):
        raise AnnotationFormatError("detection record must be a JSON object", line_number)
    missing = [key for key in _FIELDS if key not in record]
    if missing:
        raise AnnotationFormatError(f"missing fields {missing}", line_number)
    if not isinstance(record["image"], str):
        raise AnnotationFormatError("'image' must be a string", line_number)
    class_id = record["class"]
    if isinstance(class_id, bool) or not isinstance(class_id, int):
        raise AnnotationFormatError("'class' must be an integer", line_number)
    if class_count is not None and not 0 <= class_id < class_count:
        raise AnnotationFormatError(
            f"'class' {class_id} is outside the {class_count} foreground classes", line_number
        )
    numbers = []
    for key in _FIELDS[2:]:
        value = record[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise AnnotationFormatError(f"'{key}' must be a number", line_number)
        if not math.isfinite(value):
            raise AnnotationFormatError(f"'{key}' must be finite", line_number)
        numbers.append(float(value))
    try:
        det = Detection(box=BoxF(*numbers[1:]), class_id=class_id, score=numbers[0])
    except ValueError as e:
        raise AnnotationFormatError(str(e), line_number)
    return record["image"], det


def write_detections(
    path: Union[str, os.PathLike], results: Iterable[Tuple[str, Sequence[Detection]]]
) -> int:
    """Writes (image, detections) groups in the given order; returns the line count."""
    output_dir = os.path.dirname(os.fspath(path))
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for image, dets in results:
            for det in dets:
                f.write(json.dumps(detection_to_record(image, det)))
                f.write("\n")
                count += 1
    logger.info(f"Wrote {count} detections to '{path}'")
    return count


def read_detections(
    path: Union[str, os.PathLike], class_count: Optional[int] = None
) -> Dict[str, List[Detection]]:
    """Groups a detection file by image, keeping file order within each image."""
    grouped: Dict[str, List[Detection]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            image, det = parse_detection_line(line, line_number, class_count)
            grouped.setdefault(image, []).append(det)
    return grouped
