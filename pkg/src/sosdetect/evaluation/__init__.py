# sosdetect/evaluation/__init__.py
# !/usr/bin/env python3

"""
Greedy IoU matching, precision/recall and size-bucketed curves.
"""

from .metrics import (
    BucketCurve,
    CurvePoint,
    CurveReport,
    EvalConfig,
    bucket_of,
    curve,
    match_detections,
    precision_recall,
)
from .report import report_to_dict, write_report

__all__ = [
    "BucketCurve",
    "CurvePoint",
    "CurveReport",
    "EvalConfig",
    "bucket_of",
    "curve",
    "match_detections",
    "precision_recall",
    "report_to_dict",
    "write_report",
]
