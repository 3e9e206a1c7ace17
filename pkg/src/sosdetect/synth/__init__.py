# sosdetect/synth/__init__.py
# !/usr/bin/env python3

"""
Synthetic scenes, annotation files, training-patch preparation and
crop-resize augmentation.
"""

from .annotations import (
    Annotation,
    LabeledBox,
    read_annotations,
    write_annotations,
)
from .augment import AugmentConfig, augment, crop_and_resize
from .patches import SampleProvenance, TrainingSample, prep_training_patches
from .scene import SceneSpec, generate_scene, scene_filename

__all__ = [
    "Annotation",
    "LabeledBox",
    "read_annotations",
    "write_annotations",
    "AugmentConfig",
    "augment",
    "crop_and_resize",
    "SampleProvenance",
    "TrainingSample",
    "prep_training_patches",
    "SceneSpec",
    "generate_scene",
    "scene_filename",
]
