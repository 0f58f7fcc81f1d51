# SPDX-License-Identifier: Apache-2.0

"""Client side of a round: local SGD and the two uplink payloads"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from fedsfr.compression import ErrorMemory, SparseUpdate, build_local_update
from fedsfr.data import minibatches
from fedsfr.exceptions import DegenerateInputError
from fedsfr.federation.state import ClientState, FeatureSet
from fedsfr.jscc import ChannelConfig, JsccModel, channel_noise, transmit_loss_and_grad
from fedsfr.logging import logger
from fedsfr.tensor import FlatParams, Tensor, forward
from fedsfr.utils import ensure_finite


@dataclass(frozen=True)
class LocalResult:
    """Outcome of one client's local training.

    accum is w - w_k^(t,E_c), i.e. eta_c times the summed mini-batch gradients.
    """

    client_id: int
    accum: FlatParams
    final_theta: Tensor
    steps: int
    max_grad_norm: float
    mean_loss: float


def local_update(
    client: ClientState,
    model: JsccModel,
    eta_c: float,
    epochs: int,
    batch_size: int,
    channel: ChannelConfig,
    rng: np.random.Generator,
) -> LocalResult:
    """Runs E_c epochs of mini-batch SGD on l_c starting from the broadcast model

    Args:
        client (ClientState): Client and its local data
        model (JsccModel): Broadcast global model w^(t)
        eta_c (float): Client learning rate
        epochs (int): E_c
        batch_size (int): Mini-batch size
        channel (ChannelConfig): Training channel
        rng (np.random.Generator): The client's stream for this round

    Returns:
        LocalResult: accum, final encoder slice and step statistics
    """
    if epochs < 1:
        raise ValueError(f"E_c must be at least 1, got {epochs}")
    if not len(client.data):
        raise DegenerateInputError(f"Client {client.id} has no data")
    start = model.params
    w = start.values.copy()
    images = client.data.images
    steps, max_norm, losses = 0, 0.0, []
    for batch in minibatches(len(client.data), batch_size, rng, epochs):
        noise = channel_noise((batch.shape[0], model.d), channel, rng)
        _, loss, grads = transmit_loss_and_grad(model.with_params(w), images[batch], noise)
        assert grads is not None
        max_norm = max(max_norm, float(np.linalg.norm(grads.values)))
        w = ensure_finite(w - eta_c * grads.values, f"client {client.id} step {steps}")
        losses.append(loss)
        steps += 1
    logger.debug("Client %d: %d local steps, mean l_c %.6f", client.id, steps, float(np.mean(losses)))
    return LocalResult(
        client_id=client.id,
        accum=start.replace(start.values - w),
        final_theta=w[: model.theta_size].copy(),
        steps=steps,
        max_grad_norm=max_norm,
        mean_loss=float(np.mean(losses)),
    )


def make_model_payload(
    client: ClientState, accum: FlatParams, budgets: Sequence[int], t: int = 0
) -> Tuple[SparseUpdate, ErrorMemory]:
    """g_k = top_S(m_k + accum) with the memory update; the caller installs the new memory"""
    return build_local_update(accum, client.memory, budgets, origin_round=t)


def make_feature_payload(
    client: ClientState, model: JsccModel, final_theta: Tensor, budget_vectors: int, rng: np.random.Generator
) -> FeatureSet:
    """Encodes min(budget, |P_k|) public images, drawn without replacement, with the client's final encoder"""
    public = client.shard.public
    if not public.size:
        raise DegenerateInputError(f"Client {client.id} has an empty public set")
    count = min(budget_vectors, int(public.size))
    if count <= 0:
        logger.warning("Client %d: feature budget is 0, sending an empty feature set", client.id)
        return FeatureSet(owner=client.id, vectors=np.zeros((0, model.d)))
    chosen = public[np.sort(rng.choice(public.size, size=count, replace=False))]
    encoder = model.encoder.with_flat(final_theta)
    vectors, _ = forward(encoder, client.data.images[chosen])
    return FeatureSet(owner=client.id, vectors=vectors, source_ids=client.data.ids[chosen])
