# SPDX-License-Identifier: Apache-2.0

"""Server side of a round: weighted aggregation, feature reconstruction and the unsparsified reference"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from fedsfr.compression import SparseUpdate, densify
from fedsfr.data import minibatches
from fedsfr.exceptions import BudgetError
from fedsfr.jscc import ChannelConfig, JsccModel, channel_noise, fr_loss_and_grad
from fedsfr.logging import logger
from fedsfr.tensor import FlatParams, Tensor
from fedsfr.utils import ensure_finite


def aggregate(w: FlatParams, updates: Sequence[Tuple[int, float, SparseUpdate]], k: int, k_m: int) -> FlatParams:
    """w - (K / K_m) * sum_k p_k densify(g_k), summed in ascending client id

    Args:
        w (FlatParams): Global model w^(t)
        updates (Sequence): (client id, p_k, g_k) for every model-update client
        k (int): Total client count K
        k_m (int): Number of model-update clients

    Returns:
        FlatParams: w^(t+1/2)
    """
    if not updates:
        return w.replace(w.values.copy())
    if k_m <= 0:
        raise BudgetError("K_m = 0 with model updates to aggregate")
    total = np.zeros(len(w))
    for _, weight, sparse in sorted(updates, key=lambda update: update[0]):
        total += weight * densify(sparse, len(w))
    return w.replace(w.values - (k / k_m) * total)


@dataclass(frozen=True)
class ServerResult:
    w: FlatParams
    steps: int
    max_grad_norm: float
    mean_loss: float


def server_fr_update(
    model: JsccModel,
    features: Tensor,
    eta_s: float,
    epochs: int,
    batch_size: int,
    channel: ChannelConfig,
    rng: np.random.Generator,
) -> ServerResult:
    """E_s epochs of SGD on l_s over the pooled feature set D_s, starting from w^(t+1/2)

    Noise is drawn fresh for every mini-batch. An empty D_s, E_s = 0 or eta_s = 0 leaves the model unchanged.
    """
    start = model.params
    if epochs == 0 or eta_s == 0.0 or features.shape[0] == 0:
        return ServerResult(w=start.replace(start.values.copy()), steps=0, max_grad_norm=0.0, mean_loss=0.0)
    w = start.values.copy()
    steps, max_norm, losses = 0, 0.0, []
    for batch in minibatches(features.shape[0], batch_size, rng, epochs):
        noise = channel_noise((batch.shape[0], model.d), channel, rng)
        _, loss, grads = fr_loss_and_grad(model.with_params(w), features[batch], noise)
        assert grads is not None
        max_norm = max(max_norm, float(np.linalg.norm(grads.values)))
        w = ensure_finite(w - eta_s * grads.values, f"server step {steps}")
        losses.append(loss)
        steps += 1
    logger.debug("Server: %d FR steps over %d features, mean l_s %.6f", steps, features.shape[0], float(np.mean(losses)))
    return ServerResult(w=start.replace(w), steps=steps, max_grad_norm=max_norm, mean_loss=float(np.mean(losses)))


def best_reference_update(
    w: FlatParams, participants: Sequence[Tuple[int, float, Tensor, Tensor]], k: int
) -> FlatParams:
    """w - K / |A| * sum_{k in A} p_k (accum_k + m_k), with no sparsification

    Args:
        w (FlatParams): Global model w^(t)
        participants (Sequence): (client id, p_k, accum_k, m_k^(t)) for every participant of the round
        k (int): Total client count K

    Returns:
        FlatParams: The best model the server could build from full updates
    """
    if not participants:
        return w.replace(w.values.copy())
    total = np.zeros(len(w))
    for _, weight, accum, memory in sorted(participants, key=lambda p: p[0]):
        total += weight * (accum + memory)
    return w.replace(w.values - (k / len(participants)) * total)
