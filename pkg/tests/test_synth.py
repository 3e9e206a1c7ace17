# tests/test_synth.py

from dataclasses import replace

import numpy as np
import pytest

from sosdetect._exceptions import AnnotationFormatError
from sosdetect.anchors import AnchorSpec
from sosdetect.geometry import BoxF
from sosdetect.matrices.class_matrix import MAX_CLASSES, get_class_style
from sosdetect.raster import Image, PyramidConfig, write_ppm
from sosdetect.synth import (
    Annotation,
    AugmentConfig,
    LabeledBox,
    SampleProvenance,
    SceneSpec,
    TrainingSample,
    augment,
    crop_and_resize,
    generate_scene,
    prep_training_patches,
    read_annotations,
    scene_filename,
    write_annotations,
)
from sosdetect.synth.patches import label_patch
from sosdetect.synth.scene import shape_mask

SMALL_SCENES = SceneSpec(image_side=256, signs_per_image=(1, 3), sign_side_range=(16, 60))


def _sample(boxes, side=200, value=50):
    return TrainingSample(
        pixels=np.full((side, side, 3), value, dtype=np.uint8),
        boxes=boxes,
        provenance=SampleProvenance("x.ppm", 0, 0, 0, 1.0),
    )


def test_scene_is_deterministic():
    image_a, ann_a = generate_scene(SMALL_SCENES, 3)
    image_b, ann_b = generate_scene(SMALL_SCENES, 3)
    assert image_a == image_b
    assert ann_a == ann_b
    assert ann_a.image_path == scene_filename(3) == "scene_00003.ppm"
    image_c, _ = generate_scene(SMALL_SCENES, 4)
    assert image_c != image_a


def test_scene_boxes_fit_and_do_not_overlap():
    for index in range(10):
        image, annotation = generate_scene(SMALL_SCENES, index)
        assert (image.width, image.height) == (256, 256)
        boxes = [obj.box for obj in annotation.objects]
        assert 1 <= len(boxes) <= 3
        for obj in annotation.objects:
            box = obj.box
            assert 0 <= box.xmin < box.xmax <= 256
            assert 0 <= box.ymin < box.ymax <= 256
            assert 0 <= obj.class_id < SMALL_SCENES.class_count
            assert max(box.width, box.height) <= 60
        for i, a in enumerate(boxes):
            for b in boxes[i + 1 :]:
                assert a.intersection_area(b) == 0.0


def test_scene_box_is_tight_around_the_sign():
    spec = SceneSpec(
        image_side=128, signs_per_image=(1, 1), sign_side_range=(30, 40), background_noise=0
    )
    image, annotation = generate_scene(spec, 0)
    obj = annotation.objects[0]
    _, colour = get_class_style(obj.class_id)
    painted = np.all(image.pixels == np.array(colour, dtype=np.uint8), axis=-1)
    rows = np.flatnonzero(painted.any(axis=1))
    cols = np.flatnonzero(painted.any(axis=0))
    assert obj.box == BoxF(cols[0], rows[0], cols[-1] + 1, rows[-1] + 1)


def test_scene_boxes_are_tight_across_default_scenes():
    quiet = replace(SceneSpec(), background_noise=0)
    for index in range(100):
        _, noisy_annotation = generate_scene(SceneSpec(), index)
        image, annotation = generate_scene(quiet, index)
        assert annotation == noisy_annotation
        for obj in annotation.objects:
            _, colour = get_class_style(obj.class_id)
            painted = np.all(image.pixels == np.array(colour, dtype=np.uint8), axis=-1)
            xmin, ymin, xmax, ymax = (int(v) for v in obj.box.as_tuple())
            inside = painted[ymin:ymax, xmin:xmax]
            assert inside[0].any() and inside[-1].any()
            assert inside[:, 0].any() and inside[:, -1].any()
            ring = painted[max(ymin - 1, 0) : ymax + 1, max(xmin - 1, 0) : xmax + 1]
            assert np.count_nonzero(ring) == np.count_nonzero(inside)


def test_shape_masks():
    assert shape_mask("square", 8).all()
    disk = shape_mask("disk", 21)
    assert disk[10, 10] and not disk[0, 0]
    assert np.array_equal(disk, disk.T)
    ring = shape_mask("ring", 31)
    assert not ring[15, 15] and ring[15, 1]
    with pytest.raises(ValueError):
        shape_mask("star", 8)


def test_class_table():
    assert MAX_CLASSES == 10
    assert get_class_style(0)[0] == "disk"
    with pytest.raises(ValueError):
        get_class_style(MAX_CLASSES)


def test_scene_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(class_count=0)
    with pytest.raises(ValueError):
        SceneSpec(sign_side_range=(10, 600))


def test_annotation_file_round_trip(tmp_path):
    annotations = [
        Annotation("a.ppm", [LabeledBox(1, BoxF(1, 2, 30, 40.5))]),
        Annotation("b.ppm", []),
    ]
    path = tmp_path / "annotations.jsonl"
    write_annotations(path, annotations)
    assert read_annotations(path) == annotations
    assert '"xmin": 1,' in path.read_text().splitlines()[0]


@pytest.mark.parametrize(
    "bad_line",
    [
        "{not json",
        '{"image": "a.ppm"}',
        '{"image": "a.ppm", "boxes": [{"class": 0, "xmin": 0, "ymin": 0, "xmax": 0, "ymax": 5}]}',
        '{"image": "a.ppm", "boxes": [{"class": -1, "xmin": 0, "ymin": 0, "xmax": 4, "ymax": 5}]}',
        '{"image": "a.ppm", "boxes": [{"class": 0, "xmin": "0", "ymin": 0, "xmax": 4, "ymax": 5}]}',
    ],
)
def test_malformed_annotation_names_line(tmp_path, bad_line):
    path = tmp_path / "annotations.jsonl"
    path.write_text('{"image": "ok.ppm", "boxes": []}\n' + bad_line + "\n")
    with pytest.raises(AnnotationFormatError) as exc:
        read_annotations(path)
    assert exc.value.line_number == 2
    assert str(exc.value).startswith("line 2:")


def test_label_patch_needs_more_than_half_inside():
    half = LabeledBox(0, BoxF(190, 10, 210, 30))
    most = LabeledBox(1, BoxF(186, 50, 206, 70))
    labels = label_patch([half, most], 1.0, 0, 0, 200)
    assert labels == [LabeledBox(1, BoxF(186, 50, 200, 70))]


def test_label_patch_scales_and_shifts():
    obj = LabeledBox(2, BoxF(400, 400, 440, 440))
    labels = label_patch([obj], 0.5, 100, 150, 200)
    assert labels == [LabeledBox(2, BoxF(100, 50, 120, 70))]


def test_positives_come_from_matchable_levels(tmp_path):
    write_ppm(tmp_path / "big.ppm", Image.blank(400, 400, 90))
    annotation = Annotation("big.ppm", [LabeledBox(0, BoxF(100, 100, 160, 160))])
    samples = prep_training_patches(
        [annotation], str(tmp_path), PyramidConfig(), AnchorSpec(), seed=1
    )
    positives = [s for s in samples if not s.is_background]
    # Side 60 is above the 2*sqrt(2)*20 band at level 0; at level 1 it is 30.
    assert [s.provenance.level for s in positives] == [1]
    assert positives[0].boxes == [LabeledBox(0, BoxF(50, 50, 80, 80))]
    assert positives[0].pixels.shape == (200, 200, 3)
    backgrounds = [s for s in samples if s.is_background]
    assert len(backgrounds) <= 2 * len(positives)
    assert samples[: len(positives)] == positives


def test_roomy_scene_gets_two_object_free_backgrounds_per_positive(tmp_path):
    pixels = np.full((800, 800, 3), 90, dtype=np.uint8)
    pixels[100:130, 100:130] = (220, 30, 30)
    write_ppm(tmp_path / "roomy.ppm", Image(pixels))
    annotation = Annotation("roomy.ppm", [LabeledBox(0, BoxF(100, 100, 130, 130))])
    samples = prep_training_patches(
        [annotation], str(tmp_path), PyramidConfig(), AnchorSpec(), seed=3
    )
    positives = [s for s in samples if not s.is_background]
    backgrounds = [s for s in samples if s.is_background]
    assert [s.provenance.level for s in positives] == [0, 1]
    assert len(backgrounds) == 2 * len(positives)
    for sample in backgrounds:
        assert np.all(sample.pixels == 90)


def test_backgrounds_hold_no_object_pixels(tmp_path):
    quiet = replace(SMALL_SCENES, image_side=512, background_noise=0)
    annotations = []
    for index in range(6):
        image, annotation = generate_scene(quiet, index)
        write_ppm(tmp_path / annotation.image_path, image)
        annotations.append(annotation)
    samples = prep_training_patches(annotations, str(tmp_path), PyramidConfig(), AnchorSpec(), 2)
    backgrounds = [s for s in samples if s.is_background]
    assert backgrounds
    for sample in backgrounds:
        # Scene backgrounds and padding are grey; every sign colour is not.
        p = sample.pixels.astype(np.int16)
        assert np.all(p[..., 0] == p[..., 1]) and np.all(p[..., 1] == p[..., 2])


def _write_dataset(root, count):
    annotations = []
    for index in range(count):
        image, annotation = generate_scene(SMALL_SCENES, index)
        write_ppm(root / annotation.image_path, image)
        annotations.append(annotation)
    return annotations


def test_prep_is_deterministic_and_thread_independent(tmp_path):
    annotations = _write_dataset(tmp_path, 4)
    serial = prep_training_patches(annotations, str(tmp_path), PyramidConfig(), AnchorSpec(), 5)
    again = prep_training_patches(annotations, str(tmp_path), PyramidConfig(), AnchorSpec(), 5)
    threaded = prep_training_patches(
        annotations, str(tmp_path), PyramidConfig(), AnchorSpec(), 5, threads=3
    )
    positives = [s for s in serial if not s.is_background]
    assert positives
    assert len(serial) <= 3 * len(positives)
    for other in (again, threaded):
        assert len(other) == len(serial)
        for a, b in zip(serial, other):
            assert np.array_equal(a.pixels, b.pixels)
            assert a.boxes == b.boxes
            assert a.provenance == b.provenance


def test_prep_rejects_box_outside_image(tmp_path):
    write_ppm(tmp_path / "small.ppm", Image.blank(64, 64))
    annotation = Annotation("small.ppm", [LabeledBox(0, BoxF(50, 50, 80, 80))])
    with pytest.raises(AnnotationFormatError):
        prep_training_patches([annotation], str(tmp_path), PyramidConfig(), AnchorSpec(), 0)


def test_full_crop_is_identity():
    sample = _sample([LabeledBox(0, BoxF(10, 10, 30, 30))])
    out = crop_and_resize(sample, (0, 0, 200, 200))
    assert out.boxes == sample.boxes
    assert np.array_equal(out.pixels, sample.pixels)
    assert out.crop == (0, 0, 200, 200)


def test_crop_rescales_kept_boxes():
    sample = _sample([LabeledBox(0, BoxF(10, 10, 30, 30))])
    out = crop_and_resize(sample, (0, 0, 100, 100))
    assert out.boxes == [LabeledBox(0, BoxF(20, 20, 60, 60))]
    assert out.pixels.shape == (200, 200, 3)


def test_crop_drops_boxes_below_keep_fraction():
    # 60% of the box lies inside the crop
    sample = _sample([LabeledBox(0, BoxF(88, 10, 108, 30))])
    assert crop_and_resize(sample, (0, 0, 100, 100)).boxes == []
    # 80% inside survives, clipped
    sample = _sample([LabeledBox(0, BoxF(84, 10, 104, 30))])
    assert crop_and_resize(sample, (0, 0, 100, 100)).boxes == [
        LabeledBox(0, BoxF(168, 20, 200, 60))
    ]


def test_augment_is_seeded():
    sample = _sample([LabeledBox(0, BoxF(40, 40, 80, 80))])
    a = augment(sample, 11)
    b = augment(sample, 11)
    assert a.crop == b.crop
    assert a.boxes == b.boxes
    x, y, w, h = a.crop
    assert 0 <= x and x + w <= 200 and 0 <= y and y + h <= 200


def test_augment_config_validation():
    with pytest.raises(ValueError):
        AugmentConfig(min_scale=0.0)
    with pytest.raises(ValueError):
        AugmentConfig(keep_fraction=1.5)


def test_crop_keep_fraction_boundary():
    # 69% of the box inside the crop
    sample = _sample([LabeledBox(0, BoxF(31, 10, 131, 20))])
    assert crop_and_resize(sample, (0, 0, 100, 100)).boxes == []
    # 71% inside is kept as its clipped part
    sample = _sample([LabeledBox(0, BoxF(29, 10, 129, 20))])
    assert crop_and_resize(sample, (0, 0, 100, 100)).boxes == [
        LabeledBox(0, BoxF(58, 20, 200, 40))
    ]


@pytest.mark.parametrize("seed", range(10))
def test_augment_keeps_exactly_the_boxes_mostly_inside_the_crop(seed):
    rng = np.random.default_rng(seed)
    for _ in range(30):
        boxes = []
        for class_id in range(int(rng.integers(1, 6))):
            x, y = rng.uniform(0, 180, size=2)
            w, h = rng.uniform(4, 80, size=2)
            boxes.append(LabeledBox(class_id, BoxF(x, y, min(x + w, 200), min(y + h, 200))))
        out = augment(_sample(boxes), int(rng.integers(0, 2**31)))
        x, y, w, h = out.crop
        rect = BoxF(x, y, x + w, y + h)
        fractions = [obj.box.intersection_area(rect) / obj.box.area for obj in boxes]
        kept = [obj.class_id for obj in out.boxes]
        assert kept == [i for i, f in enumerate(fractions) if f >= 0.7]
        assert all(fractions[i] >= 0.7 for i in kept)
