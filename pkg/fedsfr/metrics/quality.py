# SPDX-License-Identifier: Apache-2.0

"""Reconstruction quality and the sparsification-error compensation ratio"""

import math

import numpy as np

from fedsfr.exceptions import ShapeMismatchError
from fedsfr.logging import logger
from fedsfr.tensor import Tensor


def psnr(reconstruction: Tensor, original: Tensor, max_val: float = 1.0) -> float:
    """10 log10(MAX^2 / MSE) in dB, +inf for a perfect reconstruction"""
    if reconstruction.shape != original.shape:
        raise ShapeMismatchError(f"PSNR shapes differ: {reconstruction.shape} vs {original.shape}")
    diff = reconstruction - original
    mse = float(np.mean(diff * diff))
    return psnr_from_mse(mse, max_val)


def psnr_from_mse(mse: float, max_val: float = 1.0) -> float:
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def epsilon_hat(a: Tensor, b: Tensor) -> float:
    """||a - b||^2 / (||a||^2 + ||b||^2), in [0, 2]; zero when both vectors vanish

    Args:
        a (Tensor): Weighted sum of client error memories
        b (Tensor): Server update, eta_s times the summed FR gradients

    Returns:
        float: Empirical epsilon of the compensation assumption
    """
    if a.shape != b.shape:
        raise ShapeMismatchError(f"Vectors differ in shape: {a.shape} vs {b.shape}")
    scale = float(np.dot(a, a) + np.dot(b, b))
    if scale == 0.0:
        logger.debug("Both compensation vectors are zero, epsilon_hat taken as 0")
        return 0.0
    diff = a - b
    value = float(np.dot(diff, diff)) / scale
    if value > 1.0:
        logger.debug("epsilon_hat = %.4f exceeds 1", value)
    return value


def cosine_similarity(a: Tensor, b: Tensor) -> float:
    """a.b / (||a|| ||b||), zero when either vector vanishes"""
    norms = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if norms == 0.0:
        return 0.0
    return float(np.dot(a, b)) / norms
