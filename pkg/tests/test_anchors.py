# tests/test_anchors.py

import math

import numpy as np
import pytest

from sosdetect.anchors import (
    BACKGROUND,
    AnchorSpec,
    build_anchors,
    decode,
    decode_boxes,
    encode,
    encode_boxes,
    match,
)
from sosdetect.geometry import BoxF, iou


def test_default_lattice_size_and_scales():
    spec = AnchorSpec()
    grid = build_anchors(spec)
    assert len(grid) == 3750
    assert spec.boxes_per_cell == 6
    assert spec.cell_stride == 8
    assert spec.s1 == pytest.approx(20.0, abs=1e-12)
    assert spec.s2 == pytest.approx(math.sqrt(800.0), abs=1e-12)


def test_cell_shapes_follow_aspect_formulas():
    spec = AnchorSpec()
    shapes = spec.cell_shapes()
    assert shapes[0] == pytest.approx([20.0, 20.0], abs=1e-9)
    assert shapes[1] == pytest.approx([math.sqrt(800.0)] * 2, abs=1e-9)
    for row, r in zip(shapes[2:], (2.0, 3.0, 0.5, 1.0 / 3.0)):
        assert row[0] == pytest.approx(20.0 * math.sqrt(r), abs=1e-9)
        assert row[1] == pytest.approx(20.0 / math.sqrt(r), abs=1e-9)


def test_anchor_order_is_row_major_then_slot():
    grid = build_anchors(AnchorSpec())
    assert grid.box(0) == BoxF(-6.0, -6.0, 14.0, 14.0)
    # second cell of the first row moves right by one stride
    assert grid.boxes[6] == pytest.approx([2.0, -6.0, 22.0, 14.0])
    # first cell of the second row moves down by one stride
    assert grid.boxes[25 * 6] == pytest.approx([-6.0, 2.0, 14.0, 22.0])
    centers = (grid.boxes[:, :2] + grid.boxes[:, 2:]) / 2.0
    assert np.allclose(centers[:6], 4.0)


def test_anchor_boxes_are_read_only():
    grid = build_anchors(AnchorSpec())
    with pytest.raises(ValueError):
        grid.boxes[0, 0] = 1.0


def test_encode_decode_round_trip():
    rng = np.random.default_rng(0)
    anchors = build_anchors(AnchorSpec()).boxes[rng.choice(3750, size=50)]
    xy = rng.uniform(0, 200, size=(50, 2))
    wh = rng.uniform(2, 80, size=(50, 2))
    gt = np.concatenate([xy, xy + wh], axis=1)
    assert np.allclose(decode_boxes(encode_boxes(gt, anchors), anchors), gt, atol=1e-9)


def test_encode_of_anchor_itself_is_zero():
    anchor = BoxF(90, 90, 110, 110)
    assert encode(anchor, anchor) == pytest.approx((0.0, 0.0, 0.0, 0.0))
    shifted = decode((0.5, 0.0, math.log(2.0), 0.0), anchor)
    assert shifted.as_tuple() == pytest.approx((90.0, 90.0, 130.0, 110.0), abs=1e-12)


def test_match_gt_equal_to_anchor():
    grid = build_anchors(AnchorSpec())
    gt = grid.box(12 * 25 * 6 + 12 * 6)
    result = match([gt], grid)
    assert result.assignment[12 * 25 * 6 + 12 * 6] == 0
    assert result.matched_count >= 1


def test_match_is_strictly_above_threshold():
    grid = build_anchors(AnchorSpec())
    # Exactly half of the first anchor: IoU 0.5 is not a match.
    gt = BoxF(-6.0, -6.0, 14.0, 4.0)
    assert iou(gt, grid.box(0)) == 0.5
    result = match([gt], grid)
    assert result.assignment[0] == BACKGROUND


def test_large_object_matches_no_anchor():
    result = match([BoxF(50.0, 50.0, 150.0, 150.0)], build_anchors(AnchorSpec()))
    assert result.matched_count == 0
    assert np.all(result.assignment == BACKGROUND)


def test_downsampled_object_is_matched_by_the_larger_square():
    grid = build_anchors(AnchorSpec())
    cell = 12 * 25 * 6 + 12 * 6
    # 25 px object centred on the cell centre (100, 100)
    gt = BoxF(87.5, 87.5, 112.5, 112.5)
    assert iou(gt, grid.box(cell + 1)) == pytest.approx(625.0 / 800.0)
    result = match([gt], grid)
    assert result.assignment[cell + 1] == 0


def test_one_object_can_claim_several_anchors():
    grid = build_anchors(AnchorSpec())
    result = match([BoxF(87.5, 87.5, 112.5, 112.5)], grid)
    claimed = np.flatnonzero(result.assignment == 0)
    assert len(claimed) >= 2
    assert result.matched_count == len(claimed)


def test_match_no_ground_truth():
    result = match([], build_anchors(AnchorSpec()))
    assert result.matched_count == 0
    assert not np.any(result.positive_mask)


def test_match_rejects_threshold():
    with pytest.raises(ValueError):
        match([], build_anchors(AnchorSpec()), threshold=1.0)


def _match_oracle(gts, grid, threshold):
    out = []
    for k in range(len(grid)):
        anchor = grid.box(k)
        best, best_iou = BACKGROUND, -1.0
        for g, gt in enumerate(gts):
            value = iou(anchor, gt)
            if value > best_iou:
                best, best_iou = g, value
        out.append(best if best_iou > threshold else BACKGROUND)
    return out


@pytest.mark.parametrize("seed", range(25))
def test_match_agrees_with_brute_force(seed):
    spec = AnchorSpec(input_side=40, feature_side=5)
    grid = build_anchors(spec)
    rng = np.random.default_rng(seed)
    for _ in range(40):
        gts = []
        for _ in range(int(rng.integers(1, 4))):
            x, y = rng.uniform(-5, 40, size=2)
            w, h = rng.uniform(2, 15, size=2)
            gts.append(BoxF(x, y, x + w, y + h))
        assert match(gts, grid, 0.5).assignment.tolist() == _match_oracle(gts, grid, 0.5)
