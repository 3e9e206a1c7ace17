# sosdetect/config.py
# !/usr/bin/env python3

"""
Run configuration: one JSON document aggregating every stage's settings.

    {
      "seed": 42, "threads": 1, "scenes": 200,
      "scene":   {...SceneSpec minus seed...},
      "pyramid": {...}, "tiler": {...}, "anchors": {...},
      "model":   {"class_count_with_background": 6, "stage_channels": [...], ...},
      "train":   {...TrainConfig minus seed...},
      "loss":    {...}, "augment": {...},
      "detect":  {"score_threshold": 0.5, "nms_iou": 0.45, "batch_size": 16,
                  "levels": null},
      "eval":    {...},
      "paths":   {"dataset": null, ...}
    }

Every key is optional and takes the documented default. Unknown keys are
rejected with their dotted name. The global seed feeds both scene synthesis
and training.
"""

import json
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Mapping, Optional, Union

from ._exceptions import ConfigError
from .anchors.anchors import AnchorSpec
from .detect.detector import DetectConfig
from .detect.levels import parse_levels
from .evaluation.metrics import EvalConfig
from .net.model import ModelConfig
from .raster.pyramid import PyramidConfig
from .raster.tiler import TilerConfig
from .synth.augment import AugmentConfig
from .synth.scene import SceneSpec
from .train.loop import TrainConfig
from .train.loss import LossConfig

logger = logging.getLogger(__name__)

RESOLVED_CONFIG_FILENAME = "config.resolved.json"

_TOP_LEVEL = (
    "seed",
    "threads",
    "scenes",
    "scene",
    "pyramid",
    "tiler",
    "anchors",
    "model",
    "train",
    "loss",
    "augment",
    "detect",
    "eval",
    "paths",
)


@dataclass(frozen=True)
class PathsConfig:
    dataset: Optional[str] = None
    checkpoint: Optional[str] = None
    detections: Optional[str] = None
    annotations: Optional[str] = None
    out: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    threads: int = 1
    scenes: int = 200
    scene: SceneSpec = field(default_factory=SceneSpec)
    pyramid: PyramidConfig = field(default_factory=PyramidConfig)
    tiler: TilerConfig = field(default_factory=TilerConfig)
    anchors: AnchorSpec = field(default_factory=AnchorSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    detect: DetectConfig = field(default_factory=DetectConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.scenes < 0:
            raise ConfigError(f"scenes must be >= 0, got {self.scenes}")
        side = self.anchors.input_side
        if self.model.anchor_spec != self.anchors:
            raise ConfigError("model.anchor_spec must equal the anchors section")
        if self.pyramid.patch_side != side:
            raise ConfigError(f"pyramid.patch_side must equal anchors.input_side ({side})")
        if (self.tiler.patch_width, self.tiler.patch_height) != (side, side):
            raise ConfigError(f"tiler patch size must equal anchors.input_side ({side})")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("Run configuration must be a JSON object")
        for key in data:
            if key not in _TOP_LEVEL:
                raise ConfigError(f"Unknown config key '{key}'")
        seed = _integer(data.get("seed", 42), "seed")
        threads = _integer(data.get("threads", 1), "threads")
        scenes = _integer(data.get("scenes", 200), "scenes")

        anchors = _section(AnchorSpec, data.get("anchors"), "anchors")
        pyramid = _section(PyramidConfig, data.get("pyramid"), "pyramid")
        tiler = _section(TilerConfig, data.get("tiler"), "tiler")
        detect_data = dict(_mapping(data.get("detect"), "detect"))
        levels = detect_data.pop("levels", None)
        if levels is not None:
            if not isinstance(levels, str):
                raise ConfigError("'detect.levels' must be a string such as \"2..\" or null")
            levels = parse_levels(levels)
        return cls(
            seed=seed,
            threads=threads,
            scenes=scenes,
            scene=_section(SceneSpec, data.get("scene"), "scene", seed=seed),
            pyramid=pyramid,
            tiler=tiler,
            anchors=anchors,
            model=_section(ModelConfig, data.get("model"), "model", anchor_spec=anchors),
            train=_section(TrainConfig, data.get("train"), "train", seed=seed),
            loss=_section(LossConfig, data.get("loss"), "loss"),
            augment=_section(AugmentConfig, data.get("augment"), "augment"),
            detect=_section(
                DetectConfig,
                detect_data,
                "detect",
                pyramid=pyramid,
                tiler=tiler,
                levels=levels,
            ),
            eval=_section(EvalConfig, data.get("eval"), "eval"),
            paths=_section(PathsConfig, data.get("paths"), "paths"),
        )

    def to_dict(self) -> Dict[str, Any]:
        """The fully resolved document; from_dict(to_dict()) reproduces the run."""
        detect = _plain(self.detect, exclude=("pyramid", "tiler", "levels"))
        detect["levels"] = self.detect.levels.describe() if self.detect.levels else None
        return {
            "seed": self.seed,
            "threads": self.threads,
            "scenes": self.scenes,
            "scene": _plain(self.scene, exclude=("seed",)),
            "pyramid": _plain(self.pyramid),
            "tiler": _plain(self.tiler),
            "anchors": _plain(self.anchors),
            "model": _plain(self.model, exclude=("anchor_spec",)),
            "train": _plain(self.train, exclude=("seed",)),
            "loss": _plain(self.loss),
            "augment": _plain(self.augment),
            "detect": detect,
            "eval": _plain(self.eval),
            "paths": _plain(self.paths),
        }

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Re-resolves the document with top-level values replaced; None means keep."""
        data = self.to_dict()
        data.update({key: value for key, value in overrides.items() if value is not None})
        return RunConfig.from_dict(data)


def _integer(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{name}' must be an integer, got {value!r}")
    return value


def _mapping(value: Any, name: str) -> Mapping[str, Any]:
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"'{name}' must be a JSON object")
    return value


def _section(cls, value: Any, name: str, **fixed: Any):
    data = _mapping(value, name)
    allowed = {f.name for f in fields(cls)} - set(fixed)
    for key in data:
        if key not in allowed:
            raise ConfigError(f"Unknown config key '{name}.{key}'")
    try:
        return cls(**data, **fixed)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid '{name}' section: {e}")


def _plain(obj: Any, exclude=()) -> Dict[str, Any]:
    def convert(value):
        if isinstance(value, (tuple, list)):
            return [convert(v) for v in value]
        return value

    return {f.name: convert(getattr(obj, f.name)) for f in fields(obj) if f.name not in exclude}


def load_run_config(path: Optional[Union[str, os.PathLike]] = None) -> RunConfig:
    """Reads a JSON run configuration; no path gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read config '{path}': {e.strerror or e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config '{path}' is not valid JSON: {e.msg} (line {e.lineno})")
    config = RunConfig.from_dict(data)
    logger.debug(f"Loaded run configuration from '{path}'")
    return config


def dump_run_config(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)


def write_resolved_config(config: RunConfig, out_dir: Union[str, os.PathLike]) -> str:
    """Writes config.resolved.json into out_dir and returns its path."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, RESOLVED_CONFIG_FILENAME)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_run_config(config))
        f.write("\n")
    return path
