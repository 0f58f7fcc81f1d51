# SPDX-License-Identifier: Apache-2.0

"""JSCC autoencoder: encoder theta and decoder phi viewed as one vector w = {theta, phi}"""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from fedsfr.exceptions import ShapeMismatchError
from fedsfr.tensor import (
    Boundaries,
    Conv2d,
    FlatParams,
    LayerSpec,
    Network,
    ReLU,
    Reshape,
    Shape,
    Sigmoid,
    Tensor,
    TransposeConv2d,
    init_network,
)
from fedsfr.tensor.network import boundaries_for


@dataclass(frozen=True)
class JsccModel:
    encoder: Network
    decoder: Network

    def __post_init__(self) -> None:
        if len(self.encoder.output_shape) != 1:
            raise ShapeMismatchError(f"Encoder must emit a vector, emits {self.encoder.output_shape}")
        if self.decoder.input_shape != self.encoder.output_shape:
            raise ShapeMismatchError(
                f"Decoder input {self.decoder.input_shape} does not match encoder output {self.encoder.output_shape}"
            )
        if self.decoder.output_shape != self.encoder.input_shape:
            raise ShapeMismatchError(
                f"Decoder output {self.decoder.output_shape} does not match image shape {self.encoder.input_shape}"
            )

    @property
    def d(self) -> int:
        return self.encoder.output_shape[0]

    @property
    def image_shape(self) -> Shape:
        return self.encoder.input_shape

    @property
    def theta_size(self) -> int:
        """Offset of the theta/phi boundary in the flat vector."""
        return self.encoder.param_count

    @property
    def param_count(self) -> int:
        return self.encoder.param_count + self.decoder.param_count

    @property
    def boundaries(self) -> Boundaries:
        return boundaries_for([n for _, n in self.encoder.boundaries] + [n for _, n in self.decoder.boundaries])

    @property
    def params(self) -> FlatParams:
        values = np.concatenate([self.encoder.flatten().values, self.decoder.flatten().values])
        return FlatParams(values=values, boundaries=self.boundaries)

    def with_params(self, values: Tensor) -> "JsccModel":
        if values.shape != (self.param_count,):
            raise ShapeMismatchError(f"Expected {self.param_count} parameters, got {values.shape}")
        split = self.theta_size
        return JsccModel(self.encoder.with_flat(values[:split]), self.decoder.with_flat(values[split:]))

    def theta(self, values: Tensor) -> Tensor:
        return values[: self.theta_size]


def conv_autoencoder_layers(
    image_shape: Shape, channels: Sequence[int], encoder_kernel: int = 4
) -> "tuple[List[LayerSpec], List[LayerSpec], int]":
    """Builds mirrored conv / transpose-conv stacks that halve and double spatial extent per stage

    The encoder uses stride-2 convs with padding 1; the decoder uses kernel-4, stride-2,
    padding-1 transpose convs, which exactly double an extent.

    Args:
        image_shape (tuple): (C, H, W) of the images
        channels (Sequence[int]): Channel widths, starting with C
        encoder_kernel (int): 3 or 4

    Returns:
        tuple: Encoder layers, decoder layers, feature length d
    """
    if channels[0] != image_shape[0]:
        raise ShapeMismatchError(f"First channel width {channels[0]} must equal image channels {image_shape[0]}")
    encoder: List[LayerSpec] = []
    shape: Shape = tuple(image_shape)
    stages = len(channels) - 1
    for stage in range(stages):
        conv = Conv2d(channels[stage], channels[stage + 1], encoder_kernel, stride=2, padding=1)
        shape = conv.output_shape(shape)
        encoder.append(conv)
        if stage < stages - 1:
            encoder.append(ReLU())
    d = int(np.prod(shape))
    encoder.append(Reshape((d,)))

    decoder: List[LayerSpec] = [Reshape(shape)]
    for stage in range(stages, 0, -1):
        decoder.append(TransposeConv2d(channels[stage], channels[stage - 1], 4, stride=2, padding=1))
        decoder.append(ReLU() if stage > 1 else Sigmoid())
    return encoder, decoder, d


ARCHITECTURES = {
    # 1x8x8 images, d = 16
    "desk": {"image_shape": (1, 8, 8), "channels": (1, 8, 4), "encoder_kernel": 4},
    # 3x32x32 images, 5 conv + 5 transpose-conv layers, d = 256, about 0.35M parameters
    "paper-analog": {"image_shape": (3, 32, 32), "channels": (3, 8, 16, 24, 48, 256), "encoder_kernel": 3},
}


def build_jscc(
    image_shape: Shape, channels: Sequence[int], rng: np.random.Generator, encoder_kernel: int = 4
) -> JsccModel:
    encoder_layers, decoder_layers, d = conv_autoencoder_layers(image_shape, channels, encoder_kernel)
    encoder = init_network(tuple(image_shape), encoder_layers, rng)
    decoder = init_network((d,), decoder_layers, rng)
    return JsccModel(encoder, decoder)
