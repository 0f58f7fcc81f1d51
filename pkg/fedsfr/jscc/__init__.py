# SPDX-License-Identifier: Apache-2.0

from fedsfr.jscc.channel import ChannelConfig, apply_awgn, channel_noise
from fedsfr.jscc.features import pack_features, unpack_features
from fedsfr.jscc.model import ARCHITECTURES, JsccModel, build_jscc, conv_autoencoder_layers
from fedsfr.jscc.pipeline import (
    encode,
    fr_loss_and_grad,
    fr_pass,
    normalize,
    transmit_image,
    transmit_loss_and_grad,
)

__all__ = [
    "ARCHITECTURES",
    "ChannelConfig",
    "JsccModel",
    "apply_awgn",
    "build_jscc",
    "channel_noise",
    "conv_autoencoder_layers",
    "encode",
    "fr_loss_and_grad",
    "fr_pass",
    "normalize",
    "pack_features",
    "transmit_image",
    "transmit_loss_and_grad",
    "unpack_features",
]
