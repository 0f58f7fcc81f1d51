# SPDX-License-Identifier: Apache-2.0

"""Central-difference gradient oracles"""

from typing import Callable, Optional, Sequence

import numpy as np

from fedsfr.tensor.layers import Tensor
from fedsfr.tensor.network import FlatParams, Network, forward

STEP = 1e-5


def numerical_gradient(
    loss: Callable[[Tensor], float],
    w: Tensor,
    coordinates: Optional[Sequence[int]] = None,
    h: float = STEP,
) -> Tensor:
    """Estimates d(loss)/d(w) by central differences

    Args:
        loss (Callable): Deterministic scalar function of a flat vector
        w (Tensor): Point of evaluation
        coordinates (Optional[Sequence[int]]): Subset of coordinates to perturb, all when None
        h (float): Step size

    Returns:
        Tensor: Estimate, zero on coordinates that were not perturbed
    """
    estimate = np.zeros_like(w)
    shifted = w.copy()
    indices = range(w.shape[0]) if coordinates is None else coordinates
    for i in indices:
        original = shifted[i]
        shifted[i] = original + h
        upper = loss(shifted)
        shifted[i] = original - h
        lower = loss(shifted)
        shifted[i] = original
        estimate[i] = (upper - lower) / (2.0 * h)
    return estimate


def finite_diff_gradient(
    net: Network,
    input: Tensor,
    loss: Callable[[Tensor], float],
    coordinates: Optional[Sequence[int]] = None,
) -> FlatParams:
    """Central-difference gradient of loss(forward(net, input)) w.r.t. the network parameters"""
    flat = net.flatten()

    def objective(values: Tensor) -> float:
        output, _ = forward(net.with_flat(values), input)
        return loss(output)

    return flat.replace(numerical_gradient(objective, flat.values, coordinates))


def relative_error(analytic: Tensor, numeric: Tensor) -> float:
    """||a - b|| / max(||a||, ||b||), zero when both vanish"""
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / scale
