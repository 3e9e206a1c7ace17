# sosdetect/evaluation/report.py
# !/usr/bin/env python3

import csv
import json
import logging
import os
from typing import Any, Dict, List, Union

from .metrics import BucketCurve, CurvePoint, CurveReport

logger = logging.getLogger(__name__)

REPORT_FILENAME = "report.json"
CURVE_COLUMNS = ("threshold", "precision", "recall")


def curve_filename(name: str) -> str:
    return f"curve_{name}.csv"


def _point_to_dict(point: CurvePoint) -> Dict[str, Any]:
    return {
        "threshold": point.threshold,
        "precision": point.precision,
        "recall": point.recall,
        "true_positives": point.true_positives,
        "false_positives": point.false_positives,
    }


def _curve_to_dict(curve: BucketCurve) -> Dict[str, Any]:
    entry: Dict[str, Any] = {
        "ground_truths": curve.ground_truths,
        "operating_point": _point_to_dict(curve.operating_point),
        "curve_points": len(curve.points),
        "curve_file": curve_filename(curve.name),
    }
    if curve.bounds is not None:
        entry["area_range"] = list(curve.bounds)
    return entry


def report_to_dict(report: CurveReport) -> Dict[str, Any]:
    config = report.config
    return {
        "metric": "precision (reported as accuracy) and recall",
        "iou_threshold": config.iou_threshold,
        "operating_threshold": config.operating_threshold,
        "min_curve_score": config.min_curve_score,
        "detections": report.detections,
        "excluded_from_buckets": report.excluded_from_buckets,
        "overall": _curve_to_dict(report.overall),
        "buckets": {name: _curve_to_dict(c) for name, c in report.buckets.items()},
    }


def write_curve_csv(path: Union[str, os.PathLike], curve: BucketCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for point in curve.points:
            writer.writerow([repr(point.threshold), repr(point.precision), repr(point.recall)])


def write_report(out_dir: Union[str, os.PathLike], report: CurveReport) -> List[str]:
    """Writes report.json and one curve CSV per bucket; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, REPORT_FILENAME)
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report_to_dict(report), f, indent=2, sort_keys=True)
        f.write("\n")
    written = [report_path]
    for curve in report.curves():
        path = os.path.join(out_dir, curve_filename(curve.name))
        write_curve_csv(path, curve)
        written.append(path)
    logger.info(f"Wrote evaluation report and {len(written) - 1} curves to '{out_dir}'")
    return written
