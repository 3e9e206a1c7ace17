# sosdetect/evaluation/metrics.py
# !/usr/bin/env python3

"""
Detection scoring against ground truth.

"Accuracy" in reported numbers is precision: TP / (TP + FP). A detection is a
true positive when it is the highest-scoring detection to claim an unmatched
ground truth of the same class with IoU >= iou_threshold.

Size buckets are closed at the top: small [0, 32^2], medium (32^2, 96^2],
large (96^2, 400^2]. Ground truths above the last bound count in the overall
figures only.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .._parallel import map_ordered
from ..geometry.boxes import Detection, detection_sort_key, iou_matrix
from ..synth.annotations import LabeledBox

logger = logging.getLogger(__name__)

OVERALL = "overall"

Detections = Union[Sequence[Detection], Mapping[str, Sequence[Detection]]]
GroundTruths = Union[Sequence[LabeledBox], Mapping[str, Sequence[LabeledBox]]]


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    min_curve_score: float = 0.01
    operating_threshold: float = 0.5
    bucket_names: Tuple[str, ...] = ("small", "medium", "large")
    bucket_bounds: Tuple[float, ...] = (32.0**2, 96.0**2, 400.0**2)

    def __post_init__(self):
        object.__setattr__(self, "bucket_names", tuple(self.bucket_names))
        object.__setattr__(self, "bucket_bounds", tuple(float(b) for b in self.bucket_bounds))
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")
        if not 0.0 <= self.min_curve_score <= 1.0:
            raise ValueError("min_curve_score must lie in [0, 1]")
        if not 0.0 <= self.operating_threshold <= 1.0:
            raise ValueError("operating_threshold must lie in [0, 1]")
        if len(self.bucket_names) != len(self.bucket_bounds):
            raise ValueError("Every bucket needs exactly one upper bound")
        if OVERALL in self.bucket_names or len(set(self.bucket_names)) != len(
            self.bucket_names
        ):
            raise ValueError(f"Bucket names must be unique and not '{OVERALL}'")
        bounds = (0.0,) + self.bucket_bounds
        if any(hi <= lo for lo, hi in zip(bounds, bounds[1:])):
            raise ValueError(f"Bucket bounds must be strictly increasing: {self.bucket_bounds}")

    def bucket_range(self, index: int) -> Tuple[float, float]:
        lower = 0.0 if index == 0 else self.bucket_bounds[index - 1]
        return lower, self.bucket_bounds[index]


def bucket_of(area: float, config: EvalConfig) -> Optional[int]:
    """Index of the bucket holding `area`, or None above the last bound."""
    for index, upper in enumerate(config.bucket_bounds):
        if area <= upper:
            return index
    return None


def _greedy_assign(
    dets: Sequence[Detection], gts: Sequence[LabeledBox], iou_threshold: float
) -> List[Optional[int]]:
    """Matched ground-truth index per detection (input order), None for FPs."""
    assigned: List[Optional[int]] = [None] * len(dets)
    if not dets or not gts:
        return assigned
    overlaps = iou_matrix(
        np.array([d.box.as_tuple() for d in dets]), np.array([g.box.as_tuple() for g in gts])
    )
    gt_classes = np.array([g.class_id for g in gts])
    taken = np.zeros(len(gts), dtype=bool)
    order = sorted(range(len(dets)), key=lambda i: detection_sort_key(dets[i]))
    for i in order:
        eligible = (~taken) & (gt_classes == dets[i].class_id) & (overlaps[i] >= iou_threshold)
        if not np.any(eligible):
            continue
        # argmax returns the lowest gt index among equal overlaps.
        best = int(np.argmax(np.where(eligible, overlaps[i], -1.0)))
        taken[best] = True
        assigned[i] = best
    return assigned


def match_detections(
    dets: Sequence[Detection], gts: Sequence[LabeledBox], iou_threshold: float = 0.5
) -> List[bool]:
    """True-positive flag per detection, aligned with the input order."""
    return [gt is not None for gt in _greedy_assign(dets, gts, iou_threshold)]


def _by_image(dets: Detections, gts: GroundTruths):
    if not isinstance(dets, Mapping):
        dets = {"": list(dets)}
    if not isinstance(gts, Mapping):
        gts = {"": list(gts)}
    unknown = sorted(set(dets) - set(gts))
    if unknown:
        logger.warning(
            f"{len(unknown)} images have detections but no annotation record; "
            f"their detections count as false positives"
        )
    images = sorted(set(dets) | set(gts))
    return images, dets, gts


def precision_recall(
    dets: Detections,
    gts: GroundTruths,
    score_threshold: float,
    config: EvalConfig = EvalConfig(),
) -> Tuple[float, float]:
    """
    Precision and recall of the detections scoring >= score_threshold.
    Precision is 1.0 without detections, recall is 1.0 without ground truths.
    Inputs are either flat lists for one image or dicts keyed by image.
    """
    images, dets, gts = _by_image(dets, gts)
    tp = fp = total_gts = 0
    for image in images:
        kept = [d for d in dets.get(image, ()) if d.score >= score_threshold]
        image_gts = gts.get(image, ())
        flags = match_detections(kept, image_gts, config.iou_threshold)
        tp += sum(flags)
        fp += len(flags) - sum(flags)
        total_gts += len(image_gts)
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / total_gts if total_gts else 1.0
    return precision, recall


class CurvePoint(NamedTuple):
    threshold: float
    precision: float
    recall: float
    true_positives: int
    false_positives: int


@dataclass(frozen=True)
class BucketCurve:
    name: str
    ground_truths: int
    operating_point: CurvePoint
    points: List[CurvePoint] = field(default_factory=list)
    bounds: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class CurveReport:
    """Curves ordered by ascending threshold, overall and per size bucket."""

    overall: BucketCurve
    buckets: Dict[str, BucketCurve]
    excluded_from_buckets: int
    detections: int
    config: EvalConfig

    def curves(self) -> List[BucketCurve]:
        return [self.overall, *self.buckets.values()]


def _evaluate_image(
    dets: Sequence[Detection], gts: Sequence[LabeledBox], config: EvalConfig, floor: float
):
    kept = [d for d in dets if d.score >= floor]
    assigned = _greedy_assign(kept, gts, config.iou_threshold)
    scores, tps, buckets = [], [], []
    for det, gt in zip(kept, assigned):
        scores.append(det.score)
        tps.append(gt is not None)
        area = gts[gt].box.area if gt is not None else det.box.area
        index = bucket_of(area, config)
        buckets.append(-1 if index is None else index)
    gt_buckets = [bucket_of(g.box.area, config) for g in gts]
    return scores, tps, buckets, gt_buckets


def _points(thresholds, scores, tps, selected, gt_count) -> List[CurvePoint]:
    """One point per threshold from suffix counts over the ascending scores."""
    order = np.argsort(scores[selected], kind="stable")
    ranked_scores = scores[selected][order]
    ranked_tps = tps[selected][order]
    tp_suffix = np.concatenate([np.cumsum(ranked_tps[::-1])[::-1], [0]])
    start = np.searchsorted(ranked_scores, thresholds, side="left")
    points = []
    for threshold, first in zip(thresholds, start):
        tp = int(tp_suffix[first])
        fp = int(ranked_scores.size - first) - tp
        precision = tp / (tp + fp) if tp + fp else 1.0
        recall = tp / gt_count if gt_count else 1.0
        points.append(CurvePoint(float(threshold), precision, recall, tp, fp))
    return points


def curve(
    dets: Detections,
    gts: GroundTruths,
    config: EvalConfig = EvalConfig(),
    threads: int = 1,
) -> CurveReport:
    """
    Precision/recall at every distinct detection score >= min_curve_score plus
    the operating point, overall and per bucket. A TP lands in its ground
    truth's bucket and an FP in the bucket of its own area.

    Greedy matching visits detections in descending score, so the matches of
    the detections above any threshold are a prefix of one full matching pass.
    """
    images, dets, gts = _by_image(dets, gts)
    floor = min(config.min_curve_score, config.operating_threshold)
    per_image = map_ordered(
        lambda image: _evaluate_image(dets.get(image, ()), gts.get(image, ()), config, floor),
        images,
        threads,
    )
    scores = np.array([s for r in per_image for s in r[0]], dtype=np.float64)
    tps = np.array([t for r in per_image for t in r[1]], dtype=bool)
    det_buckets = np.array([b for r in per_image for b in r[2]], dtype=np.int64)
    gt_buckets = [b for r in per_image for b in r[3]]

    thresholds = np.unique(scores[scores >= config.min_curve_score])
    excluded = sum(1 for b in gt_buckets if b is None)

    def build(name, selected, gt_count, bounds=None) -> BucketCurve:
        return BucketCurve(
            name=name,
            ground_truths=gt_count,
            operating_point=_points(
                np.array([config.operating_threshold]), scores, tps, selected, gt_count
            )[0],
            points=_points(thresholds, scores, tps, selected, gt_count),
            bounds=bounds,
        )

    overall = build(OVERALL, np.ones(scores.shape, dtype=bool), len(gt_buckets))
    buckets = {
        name: build(
            name,
            det_buckets == index,
            sum(1 for b in gt_buckets if b == index),
            config.bucket_range(index),
        )
        for index, name in enumerate(config.bucket_names)
    }
    if excluded:
        logger.info(f"{excluded} ground truths exceed the largest size bucket")
    logger.info(
        f"Operating point at {config.operating_threshold}: "
        f"precision {overall.operating_point.precision:.4f}, "
        f"recall {overall.operating_point.recall:.4f}"
    )
    return CurveReport(
        overall=overall,
        buckets=buckets,
        excluded_from_buckets=excluded,
        detections=int(scores.size),
        config=config,
    )
