# SPDX-License-Identifier: Apache-2.0

"""Feed-forward networks, flat parameter views and the activation tape"""

import math
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from fedsfr.exceptions import ShapeMismatchError, TapeMismatchError
from fedsfr.tensor.layers import LayerSpec, Shape, Tensor
from fedsfr.utils import ensure_finite

Boundaries = Tuple[Tuple[int, int], ...]


@dataclass(frozen=True)
class FlatParams:
    """A length-N parameter vector with its per-layer (offset, length) table."""

    values: Tensor
    boundaries: Boundaries

    def __post_init__(self) -> None:
        offset = 0
        for start, length in self.boundaries:
            if start != offset or length < 0:
                raise ShapeMismatchError(f"Boundaries do not partition the vector at offset {start}")
            offset += length
        if offset != self.values.shape[0] or self.values.ndim != 1:
            raise ShapeMismatchError(f"Boundaries cover {offset} entries, vector has shape {self.values.shape}")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def layer(self, index: int) -> Tensor:
        start, length = self.boundaries[index]
        return self.values[start : start + length]

    def replace(self, values: Tensor) -> "FlatParams":
        return FlatParams(values=values, boundaries=self.boundaries)


def boundaries_for(lengths: Sequence[int]) -> Boundaries:
    table = []
    offset = 0
    for length in lengths:
        table.append((offset, length))
        offset += length
    return tuple(table)


class Network:
    """An ordered stack of layers with one flat parameter slice per parameterized layer."""

    def __init__(self, input_shape: Shape, layers: Sequence[LayerSpec], params: Optional[List[Tensor]] = None):
        self.input_shape: Shape = tuple(input_shape)
        self.layers: Tuple[LayerSpec, ...] = tuple(layers)

        shapes = [self.input_shape]
        for layer in self.layers:
            shapes.append(layer.output_shape(shapes[-1]))
        self.shapes: Tuple[Shape, ...] = tuple(shapes)

        self._slots: List[Optional[int]] = []
        counts: List[int] = []
        for layer in self.layers:
            if layer.param_count:
                self._slots.append(len(counts))
                counts.append(layer.param_count)
            else:
                self._slots.append(None)
        self.boundaries: Boundaries = boundaries_for(counts)

        if params is None:
            params = [np.zeros(count) for count in counts]
        if [p.shape for p in params] != [(count,) for count in counts]:
            raise ShapeMismatchError("Parameter tensors do not match the layer table")
        self.params: List[Tensor] = list(params)

    @property
    def output_shape(self) -> Shape:
        return self.shapes[-1]

    @property
    def param_count(self) -> int:
        return sum(length for _, length in self.boundaries)

    @property
    def signature(self) -> Tuple[Shape, Tuple[LayerSpec, ...]]:
        return (self.input_shape, self.layers)

    def layer_params(self, index: int) -> Tensor:
        slot = self._slots[index]
        return self.params[slot] if slot is not None else np.zeros(0)

    def flatten(self) -> FlatParams:
        values = np.concatenate(self.params) if self.params else np.zeros(0)
        return FlatParams(values=values, boundaries=self.boundaries)

    def unflatten(self, flat: FlatParams) -> List[Tensor]:
        if flat.boundaries != self.boundaries:
            raise ShapeMismatchError("Flat parameter boundaries do not match this network")
        return [flat.layer(i).copy() for i in range(len(self.boundaries))]

    def with_flat(self, values: Tensor) -> "Network":
        """Returns a network sharing this layer table whose parameters view `values`."""
        if values.shape != (self.param_count,):
            raise ShapeMismatchError(f"Expected {self.param_count} parameters, got {values.shape}")
        return Network(self.input_shape, self.layers, [values[s : s + n] for s, n in self.boundaries])


@dataclass
class Tape:
    """Activation record of one forward call."""

    signature: Tuple[Shape, Tuple[LayerSpec, ...]]
    batched: bool
    caches: List[Any] = field(default_factory=list)


def init_network(input_shape: Shape, layers: Sequence[LayerSpec], rng: np.random.Generator) -> Network:
    """Kaiming-uniform fan-in initialisation with zero biases

    Args:
        input_shape (tuple): Per-sample input shape
        layers (list): Layer table
        rng (np.random.Generator): Seeded generator

    Returns:
        Network: Initialised network
    """
    net = Network(input_shape, layers)
    params = []
    for layer in net.layers:
        if not layer.param_count:
            continue
        n_bias = layer.dims[1]
        bound = math.sqrt(6.0 / layer.fan_in)
        weights = rng.uniform(-bound, bound, size=layer.param_count - n_bias)
        params.append(np.concatenate([weights, np.zeros(n_bias)]))
    return Network(net.input_shape, net.layers, params)


def _as_batch(shape: Shape, x: Tensor, what: str) -> Tuple[Tensor, bool]:
    if x.shape == shape:
        return x[None, ...], False
    if x.ndim == len(shape) + 1 and x.shape[1:] == shape:
        return x, True
    raise ShapeMismatchError(f"{what} shape {x.shape} does not match {shape}")


def forward(net: Network, input: Tensor) -> Tuple[Tensor, Tape]:
    """Evaluates the network and records the activations needed by backward

    Args:
        net (Network): Network to evaluate
        input (Tensor): One sample of net.input_shape, or a batch of them

    Returns:
        tuple: Output tensor and tape
    """
    x, batched = _as_batch(net.input_shape, np.asarray(input, dtype=np.float64), "Input")
    tape = Tape(signature=net.signature, batched=batched)
    for index, layer in enumerate(net.layers):
        x, cache = layer.forward(x, net.layer_params(index))
        ensure_finite(x, f"layer {index} ({layer.kind.name.lower()})")
        tape.caches.append(cache)
    return (x if batched else x[0]), tape


def backward(net: Network, tape: Tape, output_grad: Tensor) -> Tuple[FlatParams, Tensor]:
    """Propagates an output gradient back through a recorded forward pass

    Args:
        net (Network): Network used for the forward call
        tape (Tape): Tape returned by forward
        output_grad (Tensor): d(loss)/d(output), same shape as the forward output

    Returns:
        tuple: Parameter gradients aligned with net.boundaries, and d(loss)/d(input)
    """
    if tape.signature != net.signature or len(tape.caches) != len(net.layers):
        raise TapeMismatchError("Tape was recorded on a different network")
    grad = np.asarray(output_grad, dtype=np.float64)
    if not tape.batched:
        grad = grad[None, ...]
    if grad.shape[1:] != net.output_shape:
        raise ShapeMismatchError(f"Output gradient shape {grad.shape[1:]} does not match {net.output_shape}")

    grads: List[Tensor] = [np.zeros(0)] * len(net.boundaries)
    for index in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[index]
        grad, d_params = layer.backward(tape.caches[index], grad, net.layer_params(index))
        slot = net._slots[index]
        if slot is not None:
            grads[slot] = d_params
    ensure_finite(grad, "backward")
    values = np.concatenate(grads) if grads else np.zeros(0)
    return FlatParams(values=values, boundaries=net.boundaries), (grad if tape.batched else grad[0])
