# SPDX-License-Identifier: Apache-2.0

"""Loss and optimiser primitives"""

from typing import Tuple

import numpy as np

from fedsfr.exceptions import ShapeMismatchError
from fedsfr.tensor.layers import Tensor
from fedsfr.tensor.network import FlatParams
from fedsfr.utils import ensure_finite


def mse_loss(pred: Tensor, target: Tensor) -> Tuple[float, Tensor]:
    """Mean squared error and its gradient w.r.t. pred

    Args:
        pred (Tensor): Prediction
        target (Tensor): Target of the same shape

    Returns:
        tuple: (mean of squared differences, 2 (pred - target) / element count)
    """
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"MSE shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    count = diff.size
    return float(np.mean(diff * diff)), (2.0 / count) * diff


def sgd_step(params: FlatParams, grads: FlatParams, lr: float) -> FlatParams:
    """Plain SGD: params - lr * grads"""
    if len(params) != len(grads):
        raise ShapeMismatchError(f"SGD length mismatch: {len(params)} vs {len(grads)}")
    if lr < 0:
        raise ValueError(f"Learning rate must be non-negative, got {lr}")
    return params.replace(ensure_finite(params.values - lr * grads.values, "sgd_step"))
