# sosdetect/train/__init__.py
# !/usr/bin/env python3

"""
Multibox objective with hard negative mining, momentum SGD and the
training loop.
"""

from .loop import LossRecord, TrainConfig, TrainResult, train_loop, write_loss_log
from .loss import LossConfig, LossDiagnostics, hard_negatives, multibox_loss
from .sgd import OptState, sgd_step

__all__ = [
    "LossRecord",
    "TrainConfig",
    "TrainResult",
    "train_loop",
    "write_loss_log",
    "LossConfig",
    "LossDiagnostics",
    "hard_negatives",
    "multibox_loss",
    "OptState",
    "sgd_step",
]
