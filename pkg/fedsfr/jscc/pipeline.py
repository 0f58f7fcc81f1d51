# SPDX-License-Identifier: Apache-2.0

"""Encoder -> power normalization -> AWGN -> decoder, and the server-side
feature-reconstruction composite (decoder first, encoder second).

The *_loss_and_grad functions take the channel noise explicitly so that a
finite-difference check sees the exact same channel realisation.
"""

from typing import Optional, Tuple

import numpy as np

from fedsfr.exceptions import DegenerateInputError
from fedsfr.jscc.channel import ChannelConfig, channel_noise
from fedsfr.jscc.model import JsccModel
from fedsfr.tensor import FlatParams, Tensor, backward, forward, mse_loss


def encode(model: JsccModel, image: Tensor) -> Tensor:
    feature, _ = forward(model.encoder, image)
    return feature


def _normalize(feature: Tensor) -> Tuple[Tensor, Tensor]:
    norms = np.sqrt(np.sum(feature * feature, axis=-1, keepdims=True))
    if np.any(norms == 0.0):
        raise DegenerateInputError("Cannot normalize an all-zero feature vector")
    return feature / norms, norms


def normalize(feature: Tensor) -> Tensor:
    """Scales a feature (or each row of a batch of features) to unit L2 norm"""
    unit, _ = _normalize(np.asarray(feature, dtype=np.float64))
    return unit


def _normalize_backward(unit: Tensor, norms: Tensor, grad: Tensor) -> Tensor:
    return (grad - unit * np.sum(unit * grad, axis=-1, keepdims=True)) / norms


def _join(model: JsccModel, encoder_grads: FlatParams, decoder_grads: FlatParams) -> FlatParams:
    return FlatParams(values=np.concatenate([encoder_grads.values, decoder_grads.values]), boundaries=model.boundaries)


def transmit_loss_and_grad(
    model: JsccModel, images: Tensor, noise: Tensor, with_grad: bool = True
) -> Tuple[Tensor, float, Optional[FlatParams]]:
    """Client-side path X -> f_theta -> normalize -> + n -> f_phi^-1 -> X_hat with l_c = MSE(X_hat, X)

    Args:
        model (JsccModel): Model holding w = {theta, phi}
        images (Tensor): One image or a batch of images
        noise (Tensor): Channel noise, shaped like the encoder output
        with_grad (bool): Whether to run the backward pass

    Returns:
        tuple: Reconstruction, l_c and the gradient of l_c with respect to w (None without grad)
    """
    feature, encoder_tape = forward(model.encoder, images)
    unit, norms = _normalize(feature)
    received = unit + noise
    reconstruction, decoder_tape = forward(model.decoder, received)
    loss, loss_grad = mse_loss(reconstruction, np.asarray(images, dtype=np.float64))
    if not with_grad:
        return reconstruction, loss, None

    decoder_grads, received_grad = backward(model.decoder, decoder_tape, loss_grad)
    feature_grad = _normalize_backward(unit, norms, received_grad)
    encoder_grads, _ = backward(model.encoder, encoder_tape, feature_grad)
    return reconstruction, loss, _join(model, encoder_grads, decoder_grads)


def fr_loss_and_grad(
    model: JsccModel, features: Tensor, noise: Tensor, with_grad: bool = True
) -> Tuple[Tensor, float, Optional[FlatParams]]:
    """Server-side path y -> normalize -> + n -> f_phi^-1 -> f_theta -> y_hat with l_s = MSE(y_hat, y)

    The loss targets the raw feature y, not its normalized channel input.
    """
    features = np.asarray(features, dtype=np.float64)
    unit, _ = _normalize(features)
    image, decoder_tape = forward(model.decoder, unit + noise)
    estimate, encoder_tape = forward(model.encoder, image)
    loss, loss_grad = mse_loss(estimate, features)
    if not with_grad:
        return estimate, loss, None

    encoder_grads, image_grad = backward(model.encoder, encoder_tape, loss_grad)
    decoder_grads, _ = backward(model.decoder, decoder_tape, image_grad)
    return estimate, loss, _join(model, encoder_grads, decoder_grads)


def feature_shape(model: JsccModel, inputs: Tensor, per_sample_rank: int) -> Tuple[int, ...]:
    batch = inputs.shape[: inputs.ndim - per_sample_rank]
    return tuple(batch) + (model.d,)


def transmit_image(
    model: JsccModel, image: Tensor, cfg: ChannelConfig, rng: np.random.Generator
) -> Tuple[Tensor, float]:
    image = np.asarray(image, dtype=np.float64)
    noise = channel_noise(feature_shape(model, image, len(model.image_shape)), cfg, rng)
    reconstruction, loss, _ = transmit_loss_and_grad(model, image, noise, with_grad=False)
    return reconstruction, loss


def fr_pass(model: JsccModel, feature: Tensor, cfg: ChannelConfig, rng: np.random.Generator) -> Tuple[Tensor, float]:
    feature = np.asarray(feature, dtype=np.float64)
    noise = channel_noise(feature.shape, cfg, rng)
    estimate, loss, _ = fr_loss_and_grad(model, feature, noise, with_grad=False)
    return estimate, loss
