# SPDX-License-Identifier: Apache-2.0

"""Test-set evaluation of the global model"""

from typing import Tuple

import numpy as np

from fedsfr.jscc import ChannelConfig, JsccModel, channel_noise, transmit_loss_and_grad
from fedsfr.metrics.quality import psnr_from_mse
from fedsfr.tensor import Tensor
from fedsfr.utils import stream

CHUNK = 256


def dataset_loss_and_grad(
    model: JsccModel, images: Tensor, noise: Tensor, with_grad: bool = True, chunk: int = CHUNK
) -> Tuple[float, Tensor]:
    """Mean l_c over a stack of images and its gradient, evaluated in chunks

    Returns:
        tuple: Loss and flat gradient (zeros when with_grad is False)
    """
    total = images.shape[0]
    loss = 0.0
    grad = np.zeros(model.param_count)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        weight = (stop - start) / total
        _, part_loss, part_grad = transmit_loss_and_grad(model, images[start:stop], noise[start:stop], with_grad)
        loss += weight * part_loss
        if part_grad is not None:
            grad += weight * part_grad.values
    return loss, grad


def evaluate(model: JsccModel, images: Tensor, channel: ChannelConfig, seed: int, passes: int = 1) -> Tuple[float, float]:
    """Test l_c and PSNR under channel noise drawn from a fixed evaluation stream

    Every call with the same seed sees the same noise, so models evaluated in
    different rounds are compared on paired channel realisations.

    Args:
        model (JsccModel): Model to evaluate
        images (Tensor): (n, C, H, W) test images
        channel (ChannelConfig): Evaluation channel
        seed (int): Run seed
        passes (int): Number of noise realisations averaged

    Returns:
        tuple: Mean l_c and the PSNR of that mean squared error
    """
    losses = []
    for index in range(passes):
        noise = channel_noise((images.shape[0], model.d), channel, stream(seed, "evaluation", index))
        loss, _ = dataset_loss_and_grad(model, images, noise, with_grad=False)
        losses.append(loss)
    mse = float(np.mean(losses))
    return mse, psnr_from_mse(mse)


def grad_norm_estimate(
    model: JsccModel, images: Tensor, budget: int, channel: ChannelConfig, rng: np.random.Generator
) -> float:
    """||grad F(w)||^2 on the full set, or on `budget` images drawn without replacement"""
    if budget < 1:
        raise ValueError(f"Sample budget must be at least 1, got {budget}")
    count = images.shape[0]
    if budget < count:
        images = images[np.sort(rng.choice(count, size=budget, replace=False))]
    noise = channel_noise((images.shape[0], model.d), channel, rng)
    _, grad = dataset_loss_and_grad(model, images, noise)
    return float(np.dot(grad, grad))
