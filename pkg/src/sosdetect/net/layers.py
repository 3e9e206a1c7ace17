# sosdetect/net/layers.py
# !/usr/bin/env python3

"""
Forward and backward passes of the layers the detector needs.

Every op preserves the dtype of its input, so the same code runs the float32
model and the float64 finite-difference checks. Convolutions loop over the
batch one sample at a time; a sample's result therefore never depends on what
else shares its batch.
"""

import logging
from abc import ABC, abstractmethod
from typing import NamedTuple, Tuple

import numpy as np

from .._exceptions import ShapeError
from .net_utils import KERNEL, col2im_3x3, im2col_3x3

logger = logging.getLogger(__name__)


class ConvCache(NamedTuple):
    x: np.ndarray
    weights: np.ndarray


class PoolCache(NamedTuple):
    input_shape: Tuple[int, ...]
    argmax: np.ndarray


def _check_conv_shapes(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> None:
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be (B, C, H, W), got {x.shape}")
    if weights.ndim != 4 or weights.shape[2:] != (KERNEL, KERNEL):
        raise ShapeError(f"conv2d kernel must be (O, I, 3, 3), got {weights.shape}")
    if weights.shape[1] != x.shape[1]:
        raise ShapeError(
            f"conv2d channel mismatch: input has {x.shape[1]}, kernel expects "
            f"{weights.shape[1]}"
        )
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"conv2d bias must be ({weights.shape[0]},), got {bias.shape}")


def conv2d_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray
) -> Tuple[np.ndarray, ConvCache]:
    """3x3 cross-correlation, stride 1, zero padding 1."""
    _check_conv_shapes(x, weights, bias)
    batch, _, height, width = x.shape
    out_channels = weights.shape[0]
    kernel = weights.reshape(out_channels, -1)
    out = np.empty((batch, out_channels, height, width), dtype=x.dtype)
    for n in range(batch):
        cols = im2col_3x3(x[n])
        out[n] = (kernel @ cols).reshape(out_channels, height, width)
    out += bias[None, :, None, None]
    return out, ConvCache(x=x, weights=weights)


def conv2d(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return conv2d_forward(x, weights, bias)[0]


def conv2d_backward(
    grad_out: np.ndarray, cache: ConvCache
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (grad_in, grad_weights, grad_bias)."""
    x, weights = cache
    batch, channels, height, width = x.shape
    out_channels = weights.shape[0]
    if grad_out.shape != (batch, out_channels, height, width):
        raise ShapeError(
            f"conv2d grad_out shape {grad_out.shape} does not match output "
            f"{(batch, out_channels, height, width)}"
        )
    kernel = weights.reshape(out_channels, -1)
    grad_in = np.empty_like(x)
    grad_w = np.zeros_like(kernel)
    for n in range(batch):
        g = grad_out[n].reshape(out_channels, height * width)
        cols = im2col_3x3(x[n])
        grad_w += g @ cols.T
        grad_in[n] = col2im_3x3(kernel.T @ g, channels, height, width)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return grad_in, grad_w.reshape(weights.shape), grad_b


def maxpool2_forward(x: np.ndarray) -> Tuple[np.ndarray, PoolCache]:
    """2x2 max pooling, stride 2. Ties resolve to the first position in the window."""
    if x.ndim != 4:
        raise ShapeError(f"maxpool2 input must be (B, C, H, W), got {x.shape}")
    batch, channels, height, width = x.shape
    if height % 2 or width % 2:
        raise ShapeError(f"maxpool2 needs even spatial dims, got {height}x{width}")
    windows = (
        x.reshape(batch, channels, height // 2, 2, width // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, channels, height // 2, width // 2, 4)
    )
    argmax = np.argmax(windows, axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return out, PoolCache(input_shape=x.shape, argmax=argmax)


def maxpool2(x: np.ndarray) -> np.ndarray:
    return maxpool2_forward(x)[0]


def maxpool2_backward(grad_out: np.ndarray, cache: PoolCache) -> np.ndarray:
    batch, channels, height, width = cache.input_shape
    windows = np.zeros(
        (batch, channels, height // 2, width // 2, 4), dtype=grad_out.dtype
    )
    np.put_along_axis(windows, cache.argmax[..., None], grad_out[..., None], axis=-1)
    return (
        windows.reshape(batch, channels, height // 2, width // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(batch, channels, height, width)
    )


def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mask = x > 0
    return np.where(mask, x, np.zeros((), dtype=x.dtype)), mask


def relu(x: np.ndarray) -> np.ndarray:
    return relu_forward(x)[0]


def relu_backward(grad_out: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Subgradient 0 at x == 0."""
    return np.where(mask, grad_out, np.zeros((), dtype=grad_out.dtype))


class Layer(ABC):
    """
    A stateless network layer. Parameters, when any, are looked up by name in
    the parameter dict handed to forward/backward.
    """

    param_names: Tuple[str, ...] = ()

    @abstractmethod
    def forward(self, params: dict, x: np.ndarray):
        """Returns (output, cache)."""
        pass

    @abstractmethod
    def backward(self, params: dict, grad_out: np.ndarray, cache) -> Tuple[np.ndarray, dict]:
        """Returns (grad_in, {param name: gradient})."""
        pass


class Conv3x3(Layer):
    def __init__(self, name: str, in_channels: int, out_channels: int):
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.param_names = (f"{name}.weight", f"{name}.bias")

    @property
    def weight_shape(self) -> Tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels, KERNEL, KERNEL)

    @property
    def fan_in(self) -> int:
        return self.in_channels * KERNEL * KERNEL

    def forward(self, params, x):
        weight_name, bias_name = self.param_names
        return conv2d_forward(x, params[weight_name], params[bias_name])

    def backward(self, params, grad_out, cache):
        grad_in, grad_w, grad_b = conv2d_backward(grad_out, cache)
        weight_name, bias_name = self.param_names
        return grad_in, {weight_name: grad_w, bias_name: grad_b}


class ReLU(Layer):
    def forward(self, params, x):
        return relu_forward(x)

    def backward(self, params, grad_out, cache):
        return relu_backward(grad_out, cache), {}


class MaxPool2(Layer):
    def forward(self, params, x):
        return maxpool2_forward(x)

    def backward(self, params, grad_out, cache):
        return maxpool2_backward(grad_out, cache), {}
