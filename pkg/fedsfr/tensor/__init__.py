# SPDX-License-Identifier: Apache-2.0

from fedsfr.tensor.layers import (
    Conv2d,
    Dense,
    LayerKind,
    LayerSpec,
    ReLU,
    Reshape,
    Shape,
    Sigmoid,
    Tensor,
    TransposeConv2d,
)
from fedsfr.tensor.network import Boundaries, FlatParams, Network, Tape, backward, forward, init_network
from fedsfr.tensor.ops import mse_loss, sgd_step

__all__ = [
    "Boundaries",
    "Conv2d",
    "Dense",
    "FlatParams",
    "LayerKind",
    "LayerSpec",
    "Network",
    "ReLU",
    "Reshape",
    "Shape",
    "Sigmoid",
    "Tape",
    "Tensor",
    "TransposeConv2d",
    "backward",
    "forward",
    "init_network",
    "mse_loss",
    "sgd_step",
]
