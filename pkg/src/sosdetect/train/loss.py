# sosdetect/train/loss.py
# !/usr/bin/env python3

"""
Multibox objective: softmax cross-entropy over matched anchors and mined hard
negatives plus Smooth-L1 on matched offsets, normalised by the match count:

    loss = (L_conf + lambda * L_loc) / N

Class 0 of the confidence head is background; foreground class k of an
annotation is head class k + 1.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .._exceptions import ShapeError
from ..anchors.anchors import AnchorGrid, encode_boxes
from ..anchors.matching import BACKGROUND, match
from ..net.model import anchor_major_to_head, head_to_anchor_major
from ..net.net_utils import log_softmax
from ..synth.annotations import LabeledBox

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossConfig:
    """
    lam: weight of the localisation term.
    min_negatives: negatives mined from a batch that has no matched anchor.
    """

    lam: float = 1.0
    match_threshold: float = 0.5
    neg_pos_ratio: float = 3.0
    min_negatives: int = 8

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 < self.match_threshold < 1.0:
            raise ValueError("match_threshold must lie in (0, 1)")
        if self.neg_pos_ratio < 0.0:
            raise ValueError("neg_pos_ratio must be >= 0")
        if self.min_negatives < 0:
            raise ValueError("min_negatives must be >= 0")


class LossDiagnostics(NamedTuple):
    conf_loss: float
    loc_loss: float
    matched_anchors: int
    mined_negatives: int


def smooth_l1(d: np.ndarray) -> np.ndarray:
    ad = np.abs(d)
    return np.where(ad < 1.0, 0.5 * d * d, ad - 0.5)


def smooth_l1_grad(d: np.ndarray) -> np.ndarray:
    return np.where(np.abs(d) < 1.0, d, np.sign(d))


def hard_negatives(
    conf_logits: np.ndarray,
    assignment: np.ndarray,
    ratio: float,
    min_count: int = 0,
) -> np.ndarray:
    """
    Flat indices of the hardest background anchors, hardest first.

    conf_logits is anchor-major, shape (..., A, c); assignment has the leading
    shape (..., A). Candidates are all background anchors, ranked by
    -log p(background) descending with ties broken by flat index. The count is
    floor(ratio * N) for N matched anchors, or `min_count` when N is 0.
    """
    if ratio < 0.0:
        raise ValueError(f"Negative mining ratio must be >= 0, got {ratio}")
    assignment = np.asarray(assignment).reshape(-1)
    positives = int(np.count_nonzero(assignment != BACKGROUND))
    wanted = int(np.floor(ratio * positives)) if positives > 0 else int(min_count)

    candidates = np.flatnonzero(assignment == BACKGROUND)
    if wanted <= 0 or candidates.size == 0:
        return np.zeros(0, dtype=np.int64)
    log_p = log_softmax(conf_logits).reshape(assignment.size, -1)
    background_loss = -log_p[candidates, 0]
    ranking = np.lexsort((candidates, -background_loss))
    return candidates[ranking[: min(wanted, candidates.size)]].astype(np.int64)


def multibox_loss(
    conf_pred: np.ndarray,
    loc_pred: np.ndarray,
    grid: AnchorGrid,
    gt_boxes: Sequence[Sequence[LabeledBox]],
    config: LossConfig = LossConfig(),
) -> Tuple[float, np.ndarray, np.ndarray, LossDiagnostics]:
    """
    Loss and analytic head gradients for one batch.

    conf_pred: (B, slots * c, S, S) logits; loc_pred: (B, slots * 4, S, S);
    gt_boxes[b] lists the labelled boxes of patch b. Mining runs jointly over
    the batch. Returns (loss, grad_conf, grad_loc, diagnostics).
    """
    spec = grid.spec
    slots, size = spec.boxes_per_cell, spec.feature_side
    batch = conf_pred.shape[0]
    if (
        conf_pred.ndim != 4
        or conf_pred.shape[2:] != (size, size)
        or conf_pred.shape[1] % slots
        or loc_pred.shape != (batch, slots * 4, size, size)
        or len(gt_boxes) != batch
    ):
        raise ShapeError(
            f"Predictions {conf_pred.shape}/{loc_pred.shape} do not fit a "
            f"{size}x{size}x{slots} anchor grid for {len(gt_boxes)} patches"
        )
    classes = conf_pred.shape[1] // slots

    conf = head_to_anchor_major(conf_pred, slots).astype(np.float64)
    loc = head_to_anchor_major(loc_pred, slots).astype(np.float64)
    anchors = grid.boxes
    num_anchors = len(grid)

    assignment = np.full((batch, num_anchors), BACKGROUND, dtype=np.int64)
    labels = np.zeros((batch, num_anchors), dtype=np.int64)
    targets = np.zeros((batch, num_anchors, 4), dtype=np.float64)
    for b, objects in enumerate(gt_boxes):
        if not objects:
            continue
        if max(obj.class_id for obj in objects) + 1 >= classes:
            raise ShapeError(
                f"Ground-truth class exceeds the {classes - 1} foreground classes"
            )
        result = match([obj.box for obj in objects], grid, config.match_threshold)
        pos = np.flatnonzero(result.positive_mask)
        assignment[b] = result.assignment
        gt = np.array([obj.box.as_tuple() for obj in objects], dtype=np.float64)
        gt_classes = np.array([obj.class_id for obj in objects], dtype=np.int64)
        labels[b, pos] = gt_classes[result.assignment[pos]] + 1
        targets[b, pos] = encode_boxes(gt[result.assignment[pos]], anchors[pos])

    matched = int(np.count_nonzero(assignment != BACKGROUND))
    negatives = hard_negatives(conf, assignment, config.neg_pos_ratio, config.min_negatives)
    normaliser = float(max(matched, 1))

    flat_conf = conf.reshape(-1, classes)
    flat_labels = labels.reshape(-1)
    log_p = log_softmax(flat_conf)
    pos_flat = np.flatnonzero(assignment.reshape(-1) != BACKGROUND)
    selected = np.concatenate([pos_flat, negatives])

    conf_loss = float(-np.sum(log_p[selected, flat_labels[selected]]))
    grad_conf = np.zeros_like(flat_conf)
    grad_conf[selected] = np.exp(log_p[selected])
    grad_conf[selected, flat_labels[selected]] -= 1.0

    flat_loc = loc.reshape(-1, 4)
    diff = flat_loc[pos_flat] - targets.reshape(-1, 4)[pos_flat]
    loc_loss = float(np.sum(smooth_l1(diff)))
    grad_loc = np.zeros_like(flat_loc)
    grad_loc[pos_flat] = config.lam * smooth_l1_grad(diff)

    loss = (conf_loss + config.lam * loc_loss) / normaliser
    grad_conf /= normaliser
    grad_loc /= normaliser

    grad_conf_head = anchor_major_to_head(
        grad_conf.reshape(batch, num_anchors, classes), slots, size
    ).astype(conf_pred.dtype)
    grad_loc_head = anchor_major_to_head(
        grad_loc.reshape(batch, num_anchors, 4), slots, size
    ).astype(loc_pred.dtype)

    diagnostics = LossDiagnostics(
        conf_loss=conf_loss / normaliser,
        loc_loss=loc_loss / normaliser,
        matched_anchors=matched,
        mined_negatives=int(negatives.size),
    )
    return loss, grad_conf_head, grad_loc_head, diagnostics
