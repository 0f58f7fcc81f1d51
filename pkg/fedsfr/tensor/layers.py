# SPDX-License-Identifier: Apache-2.0

"""Layer kernels

Every kernel works on a leading batch axis and owns a flat parameter slice laid
out as the row-major weight followed by the bias. Backward returns gradients
summed over the batch.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, ClassVar, Dict, Tuple, Type

import numpy as np
import numpy.typing as npt

from fedsfr.exceptions import ShapeMismatchError

Tensor = npt.NDArray[np.float64]
Shape = Tuple[int, ...]

_EMPTY = np.zeros(0, dtype=np.float64)


class LayerKind(IntEnum):
    DENSE = 1
    CONV2D = 2
    TRANSPOSE_CONV2D = 3
    RELU = 4
    SIGMOID = 5
    RESHAPE = 6


@dataclass(frozen=True)
class LayerSpec(ABC):
    kind: ClassVar[LayerKind]

    @property
    @abstractmethod
    def dims(self) -> Tuple[int, ...]:
        """Kind-specific dimensions, in checkpoint order."""

    @property
    def param_count(self) -> int:
        return 0

    @property
    def fan_in(self) -> int:
        return 0

    @abstractmethod
    def output_shape(self, input_shape: Shape) -> Shape: ...

    @abstractmethod
    def forward(self, x: Tensor, params: Tensor) -> Tuple[Tensor, Any]: ...

    @abstractmethod
    def backward(self, cache: Any, grad: Tensor, params: Tensor) -> Tuple[Tensor, Tensor]: ...


@dataclass(frozen=True)
class Dense(LayerSpec):
    kind: ClassVar[LayerKind] = LayerKind.DENSE

    in_features: int
    out_features: int

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.in_features, self.out_features)

    @property
    def param_count(self) -> int:
        return self.out_features * self.in_features + self.out_features

    @property
    def fan_in(self) -> int:
        return self.in_features

    def output_shape(self, input_shape: Shape) -> Shape:
        if input_shape != (self.in_features,):
            raise ShapeMismatchError(f"Dense expects ({self.in_features},), got {input_shape}")
        return (self.out_features,)

    def _unpack(self, params: Tensor) -> Tuple[Tensor, Tensor]:
        split = self.out_features * self.in_features
        return params[:split].reshape(self.out_features, self.in_features), params[split:]

    def forward(self, x: Tensor, params: Tensor) -> Tuple[Tensor, Any]:
        weight, bias = self._unpack(params)
        return x @ weight.T + bias, x

    def backward(self, cache: Any, grad: Tensor, params: Tensor) -> Tuple[Tensor, Tensor]:
        weight, _ = self._unpack(params)
        d_weight = grad.T @ cache
        d_bias = grad.sum(axis=0)
        return grad @ weight, np.concatenate([d_weight.ravel(), d_bias])


def _window(offset: int, stride: int, count: int) -> slice:
    return slice(offset, offset + stride * (count - 1) + 1, stride)


@dataclass(frozen=True)
class Conv2d(LayerSpec):
    kind: ClassVar[LayerKind] = LayerKind.CONV2D

    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.in_channels, self.out_channels, self.kernel, self.stride, self.padding)

    @property
    def weight_shape(self) -> Shape:
        return (self.out_channels, self.in_channels, self.kernel, self.kernel)

    @property
    def param_count(self) -> int:
        return int(np.prod(self.weight_shape)) + self.out_channels

    @property
    def fan_in(self) -> int:
        return self.in_channels * self.kernel * self.kernel

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeMismatchError(f"Conv2d expects ({self.in_channels}, H, W), got {input_shape}")
        _, height, width = input_shape
        out_h = (height + 2 * self.padding - self.kernel) // self.stride + 1
        out_w = (width + 2 * self.padding - self.kernel) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise ShapeMismatchError(f"Conv2d kernel {self.kernel} does not fit input {input_shape}")
        return (self.out_channels, out_h, out_w)

    def _unpack(self, params: Tensor) -> Tuple[Tensor, Tensor]:
        split = int(np.prod(self.weight_shape))
        return params[:split].reshape(self.weight_shape), params[split:]

    def forward(self, x: Tensor, params: Tensor) -> Tuple[Tensor, Any]:
        weight, bias = self._unpack(params)
        pad = self.padding
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        out_h = (padded.shape[2] - self.kernel) // self.stride + 1
        out_w = (padded.shape[3] - self.kernel) // self.stride + 1
        out = np.zeros((x.shape[0], self.out_channels, out_h, out_w))
        for i in range(self.kernel):
            for j in range(self.kernel):
                patch = padded[:, :, _window(i, self.stride, out_h), _window(j, self.stride, out_w)]
                out += np.moveaxis(np.tensordot(patch, weight[:, :, i, j], axes=([1], [1])), 3, 1)
        out += bias[None, :, None, None]
        return out, padded

    def backward(self, cache: Any, grad: Tensor, params: Tensor) -> Tuple[Tensor, Tensor]:
        weight, _ = self._unpack(params)
        padded: Tensor = cache
        out_h, out_w = grad.shape[2], grad.shape[3]
        d_padded = np.zeros_like(padded)
        d_weight = np.zeros(self.weight_shape)
        for i in range(self.kernel):
            for j in range(self.kernel):
                rows, cols = _window(i, self.stride, out_h), _window(j, self.stride, out_w)
                d_weight[:, :, i, j] = np.tensordot(grad, padded[:, :, rows, cols], axes=([0, 2, 3], [0, 2, 3]))
                d_padded[:, :, rows, cols] += np.moveaxis(np.tensordot(grad, weight[:, :, i, j], axes=([1], [0])), 3, 1)
        pad = self.padding
        d_x = d_padded[:, :, pad : padded.shape[2] - pad, pad : padded.shape[3] - pad]
        d_bias = grad.sum(axis=(0, 2, 3))
        return d_x, np.concatenate([d_weight.ravel(), d_bias])


@dataclass(frozen=True)
class TransposeConv2d(LayerSpec):
    kind: ClassVar[LayerKind] = LayerKind.TRANSPOSE_CONV2D

    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.in_channels, self.out_channels, self.kernel, self.stride, self.padding)

    @property
    def weight_shape(self) -> Shape:
        return (self.in_channels, self.out_channels, self.kernel, self.kernel)

    @property
    def param_count(self) -> int:
        return int(np.prod(self.weight_shape)) + self.out_channels

    @property
    def fan_in(self) -> int:
        return self.out_channels * self.kernel * self.kernel

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or input_shape[0] != self.in_channels:
            raise ShapeMismatchError(f"TransposeConv2d expects ({self.in_channels}, H, W), got {input_shape}")
        _, height, width = input_shape
        out_h = (height - 1) * self.stride + self.kernel - 2 * self.padding
        out_w = (width - 1) * self.stride + self.kernel - 2 * self.padding
        if out_h < 1 or out_w < 1:
            raise ShapeMismatchError(f"TransposeConv2d padding {self.padding} crops away input {input_shape}")
        return (self.out_channels, out_h, out_w)

    def _unpack(self, params: Tensor) -> Tuple[Tensor, Tensor]:
        split = int(np.prod(self.weight_shape))
        return params[:split].reshape(self.weight_shape), params[split:]

    def forward(self, x: Tensor, params: Tensor) -> Tuple[Tensor, Any]:
        weight, bias = self._unpack(params)
        batch, _, height, width = x.shape
        full_h = (height - 1) * self.stride + self.kernel
        full_w = (width - 1) * self.stride + self.kernel
        full = np.zeros((batch, self.out_channels, full_h, full_w))
        for i in range(self.kernel):
            for j in range(self.kernel):
                rows, cols = _window(i, self.stride, height), _window(j, self.stride, width)
                full[:, :, rows, cols] += np.moveaxis(np.tensordot(x, weight[:, :, i, j], axes=([1], [0])), 3, 1)
        pad = self.padding
        out = full[:, :, pad : full_h - pad, pad : full_w - pad] + bias[None, :, None, None]
        return out, x

    def backward(self, cache: Any, grad: Tensor, params: Tensor) -> Tuple[Tensor, Tensor]:
        weight, _ = self._unpack(params)
        x: Tensor = cache
        batch, _, height, width = x.shape
        full_h = (height - 1) * self.stride + self.kernel
        full_w = (width - 1) * self.stride + self.kernel
        pad = self.padding
        d_full = np.zeros((batch, self.out_channels, full_h, full_w))
        d_full[:, :, pad : full_h - pad, pad : full_w - pad] = grad
        d_x = np.zeros_like(x)
        d_weight = np.zeros(self.weight_shape)
        for i in range(self.kernel):
            for j in range(self.kernel):
                window = d_full[:, :, _window(i, self.stride, height), _window(j, self.stride, width)]
                d_x += np.moveaxis(np.tensordot(window, weight[:, :, i, j], axes=([1], [1])), 3, 1)
                d_weight[:, :, i, j] = np.tensordot(x, window, axes=([0, 2, 3], [0, 2, 3]))
        d_bias = grad.sum(axis=(0, 2, 3))
        return d_x, np.concatenate([d_weight.ravel(), d_bias])


@dataclass(frozen=True)
class ReLU(LayerSpec):
    kind: ClassVar[LayerKind] = LayerKind.RELU

    @property
    def dims(self) -> Tuple[int, ...]:
        return ()

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: Tensor, params: Tensor) -> Tuple[Tensor, Any]:
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, cache: Any, grad: Tensor, params: Tensor) -> Tuple[Tensor, Tensor]:
        # subgradient at exactly 0 is 0
        return np.where(cache, grad, 0.0), _EMPTY


@dataclass(frozen=True)
class Sigmoid(LayerSpec):
    kind: ClassVar[LayerKind] = LayerKind.SIGMOID

    @property
    def dims(self) -> Tuple[int, ...]:
        return ()

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: Tensor, params: Tensor) -> Tuple[Tensor, Any]:
        out = 0.5 * (np.tanh(0.5 * x) + 1.0)
        return out, out

    def backward(self, cache: Any, grad: Tensor, params: Tensor) -> Tuple[Tensor, Tensor]:
        return grad * cache * (1.0 - cache), _EMPTY


@dataclass(frozen=True)
class Reshape(LayerSpec):
    kind: ClassVar[LayerKind] = LayerKind.RESHAPE

    shape: Shape

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.shape)

    def output_shape(self, input_shape: Shape) -> Shape:
        if math.prod(input_shape) != math.prod(self.shape):
            raise ShapeMismatchError(f"Cannot reshape {input_shape} into {self.shape}")
        return tuple(self.shape)

    def forward(self, x: Tensor, params: Tensor) -> Tuple[Tensor, Any]:
        return x.reshape((x.shape[0],) + tuple(self.shape)), x.shape

    def backward(self, cache: Any, grad: Tensor, params: Tensor) -> Tuple[Tensor, Tensor]:
        return grad.reshape(cache), _EMPTY


_REGISTRY: Dict[LayerKind, Type[LayerSpec]] = {
    cls.kind: cls for cls in (Dense, Conv2d, TransposeConv2d, ReLU, Sigmoid, Reshape)
}


def layer_from_dims(kind: int, dims: Tuple[int, ...]) -> LayerSpec:
    """Rebuilds a layer from its checkpoint table entry

    Args:
        kind (int): LayerKind value
        dims (tuple): Kind-specific dimensions

    Returns:
        LayerSpec: Layer instance
    """
    layer_kind = LayerKind(kind)
    cls = _REGISTRY[layer_kind]
    if layer_kind == LayerKind.RESHAPE:
        return Reshape(tuple(dims))
    return cls(*dims)  # type: ignore[call-arg]
