# sosdetect/train/loop.py
# !/usr/bin/env python3

import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Union

import numpy as np

from .._exceptions import NumericalError
from .._random import derive_seed, make_rng
from ..anchors.anchors import build_anchors
from ..net.model import DetectorModel, ModelConfig, init_weights, patches_to_tensor
from ..synth.augment import AugmentConfig, augment
from ..synth.patches import TrainingSample
from .loss import LossConfig, multibox_loss
from .sgd import OptState, sgd_step

logger = logging.getLogger(__name__)

LOSS_LOG_COLUMNS = ("iteration", "lr", "loss", "conf_loss", "loc_loss", "matched_anchors")


@dataclass(frozen=True)
class TrainConfig:
    """
    Step learning-rate schedule with momentum SGD. The defaults are the desk
    schedule; `TrainConfig.full_scale()` gives the long one.
    """

    initial_lr: float = 0.001
    lr_drop_iteration: int = 1600
    dropped_lr: float = 0.0001
    total_iterations: int = 2000
    momentum: float = 0.9
    weight_decay: float = 0.0005
    batch_size: int = 16
    seed: int = 42
    p_aug: float = 0.5
    log_interval: int = 10

    def __post_init__(self):
        if self.initial_lr <= 0.0 or self.dropped_lr <= 0.0:
            raise ValueError("Learning rates must be positive")
        if self.total_iterations < 0:
            raise ValueError("total_iterations must be >= 0")
        if self.total_iterations and not self.lr_drop_iteration < self.total_iterations:
            raise ValueError("lr_drop_iteration must come before total_iterations")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.p_aug <= 1.0:
            raise ValueError("p_aug must lie in [0, 1]")
        if self.log_interval < 1:
            raise ValueError("log_interval must be >= 1")

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        values = dict(
            initial_lr=0.001,
            lr_drop_iteration=40000,
            dropped_lr=0.0001,
            total_iterations=70000,
        )
        values.update(overrides)
        return cls(**values)

    def learning_rate(self, iteration: int) -> float:
        return self.initial_lr if iteration < self.lr_drop_iteration else self.dropped_lr


class LossRecord(NamedTuple):
    iteration: int
    lr: float
    loss: float
    conf_loss: float
    loc_loss: float
    matched_anchors: int


class TrainResult(NamedTuple):
    model: DetectorModel
    log: List[LossRecord]


class _BatchSchedule:
    """Seeded epoch shuffling; a batch may straddle an epoch boundary."""

    def __init__(self, count: int, rng: np.random.Generator):
        self.count = count
        self.rng = rng
        self.order = rng.permutation(count)
        self.cursor = 0

    def next_batch(self, size: int) -> List[int]:
        indices = []
        while len(indices) < size:
            if self.cursor == self.count:
                self.order = self.rng.permutation(self.count)
                self.cursor = 0
            indices.append(int(self.order[self.cursor]))
            self.cursor += 1
        return indices


def train_loop(
    samples: Sequence[TrainingSample],
    model_config: ModelConfig,
    train_config: TrainConfig,
    loss_config: LossConfig = LossConfig(),
    augment_config: AugmentConfig = AugmentConfig(),
) -> TrainResult:
    """Trains a freshly initialised detector on prepared samples."""
    if not samples:
        raise ValueError("train_loop needs at least one training sample")
    model = init_weights(model_config, train_config.seed)
    grid = build_anchors(model_config.anchor_spec)
    state = OptState.zeros_like(model)
    rng = make_rng(train_config.seed, 1)
    schedule = _BatchSchedule(len(samples), rng)
    log: List[LossRecord] = []

    for iteration in range(train_config.total_iterations):
        batch = []
        for index in schedule.next_batch(train_config.batch_size):
            sample = samples[index]
            if rng.random() < train_config.p_aug:
                sample = augment(sample, derive_seed(rng), augment_config)
            batch.append(sample)

        x = patches_to_tensor([s.pixels for s in batch])
        conf, loc, cache = model.forward(x)
        if iteration % train_config.log_interval == 0 and not np.any(cache.features):
            logger.warning(f"iter {iteration}: every trunk activation is zero")
        loss, grad_conf, grad_loc, diag = multibox_loss(
            conf, loc, grid, [s.boxes for s in batch], loss_config
        )
        if not math.isfinite(loss):
            raise NumericalError(f"Non-finite loss at iteration {iteration}")

        lr = train_config.learning_rate(iteration)
        grads = model.backward(cache, grad_conf, grad_loc)
        sgd_step(model, grads, state, lr, train_config.momentum, train_config.weight_decay)

        if (
            iteration % train_config.log_interval == 0
            or iteration == train_config.total_iterations - 1
        ):
            record = LossRecord(
                iteration, lr, loss, diag.conf_loss, diag.loc_loss, diag.matched_anchors
            )
            log.append(record)
            logger.info(
                f"iter {iteration}: lr={lr:g} loss={loss:.4f} conf={diag.conf_loss:.4f} "
                f"loc={diag.loc_loss:.4f} matched={diag.matched_anchors}"
            )

    return TrainResult(model=model, log=log)


def write_loss_log(path: Union[str, os.PathLike], records: Sequence[LossRecord]) -> None:
    output_dir = os.path.dirname(os.fspath(path))
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(LOSS_LOG_COLUMNS)
        for record in records:
            writer.writerow(
                [
                    record.iteration,
                    repr(record.lr),
                    repr(record.loss),
                    repr(record.conf_loss),
                    repr(record.loc_loss),
                    record.matched_anchors,
                ]
            )
