# tests/test_config.py

import json
from pathlib import Path

import pytest

from sosdetect._exceptions import ConfigError
from sosdetect.config import (
    RESOLVED_CONFIG_FILENAME,
    RunConfig,
    dump_run_config,
    load_run_config,
    write_resolved_config,
)
from sosdetect.detect import parse_levels


def test_defaults_round_trip():
    config = RunConfig()
    assert RunConfig.from_dict(config.to_dict()) == config
    assert RunConfig.from_dict({}) == config
    assert config.detect.score_threshold == 0.5
    assert config.eval.iou_threshold == 0.5
    assert config.anchors.anchor_count == 3750


def test_global_seed_feeds_scene_and_training():
    config = RunConfig.from_dict({"seed": 7})
    assert config.scene.seed == 7
    assert config.train.seed == 7
    assert config.with_overrides(seed=9).scene.seed == 9
    assert config.with_overrides(seed=None).seed == 7


def test_sections_are_read(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "threads": 2,
                "model": {"stage_channels": [2, 2, 2, 2], "class_count_with_background": 3},
                "train": {"total_iterations": 5, "lr_drop_iteration": 3},
                "detect": {"levels": "2..", "batch_size": 4},
                "paths": {"dataset": "data/train"},
            }
        )
    )
    config = load_run_config(path)
    assert config.threads == 2
    assert config.model.stage_channels == (2, 2, 2, 2)
    assert config.model.anchor_spec == config.anchors
    assert config.train.learning_rate(3) == config.train.dropped_lr
    assert config.detect.levels == parse_levels("2..")
    assert config.detect.batch_size == 4
    assert config.paths.dataset == "data/train"
    assert RunConfig.from_dict(json.loads(dump_run_config(config))) == config


@pytest.mark.parametrize(
    "document, key",
    [
        ({"train": {"lr": 0.1}}, "train.lr"),
        ({"trian": {}}, "trian"),
        ({"model": {"anchor_spec": {}}}, "model.anchor_spec"),
        ({"scene": {"seed": 3}}, "scene.seed"),
    ],
)
def test_unknown_keys_are_named(document, key):
    with pytest.raises(ConfigError, match=key):
        RunConfig.from_dict(document)


@pytest.mark.parametrize(
    "document",
    [
        {"threads": 0},
        {"scenes": -1},
        {"seed": "42"},
        {"pyramid": {"patch_side": 100}},
        {"tiler": {"patch_width": 100, "patch_height": 100, "stride": 90}},
        {"train": {"total_iterations": 10, "lr_drop_iteration": 20}},
        {"detect": {"levels": ""}},
        {"detect": {"levels": 2}},
        {"loss": "strong"},
    ],
)
def test_invalid_values_are_config_errors(document):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(document)


def test_unreadable_config_files(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    with pytest.raises(ConfigError):
        load_run_config(broken)


def test_resolved_config_reloads_to_the_same_run(tmp_path):
    config = RunConfig.from_dict({"seed": 5, "scenes": 10, "detect": {"levels": "0,2.."}})
    path = write_resolved_config(config, tmp_path / "out")
    assert path.endswith(RESOLVED_CONFIG_FILENAME)
    assert load_run_config(path) == config


def test_committed_desk_config_spells_out_the_defaults():
    path = Path(__file__).resolve().parent.parent / "configs" / "desk.json"
    assert load_run_config(path) == RunConfig()
