# sosdetect/train/sgd.py
# !/usr/bin/env python3

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Mapping, Tuple

import numpy as np

from .._exceptions import NumericalError, ShapeError
from ..net.model import DetectorModel

logger = logging.getLogger(__name__)


@dataclass
class OptState:
    velocity: "OrderedDict[str, np.ndarray]"

    @classmethod
    def zeros_like(cls, model: DetectorModel) -> "OptState":
        return cls(
            OrderedDict((name, np.zeros_like(value)) for name, value in model.params.items())
        )


def sgd_step(
    model: DetectorModel,
    grads: Mapping[str, np.ndarray],
    state: OptState,
    lr: float,
    momentum: float,
    weight_decay: float,
) -> Tuple[DetectorModel, OptState]:
    """
    Momentum SGD with L2 weight decay, in place:
        v <- momentum * v + (grad + weight_decay * param)
        param <- param - lr * v
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"Non-finite gradient for parameter {name}")
    for name, param in model.params.items():
        grad = grads[name]
        velocity = state.velocity[name]
        if grad.shape != param.shape or velocity.shape != param.shape:
            raise ShapeError(
                f"Gradient {grad.shape} / velocity {velocity.shape} do not match "
                f"parameter {name} {param.shape}"
            )
        velocity *= param.dtype.type(momentum)
        velocity += grad.astype(param.dtype) + param.dtype.type(weight_decay) * param
        param -= param.dtype.type(lr) * velocity
    return model, state
