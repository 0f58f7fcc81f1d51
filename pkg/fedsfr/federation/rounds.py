# SPDX-License-Identifier: Apache-2.0

"""The FedSFR round loop and the DSGD baseline"""

import math
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from fedsfr.compression import (
    ErrorMemory,
    SparseUpdate,
    allocate_budget,
    budget_from_ratio,
    encode_sparse,
    lemma2_bound,
    reset_memory,
)
from fedsfr.data import ImageDataset, PartitionSpec, load_idx, load_image_dir, partition, synth_dataset
from fedsfr.exceptions import ShapeMismatchError
from fedsfr.federation.client import LocalResult, local_update, make_feature_payload, make_model_payload
from fedsfr.federation.sampling import sample_round
from fedsfr.federation.schedule import lr_schedule
from fedsfr.federation.server import aggregate, best_reference_update, server_fr_update
from fedsfr.federation.state import ClientState, FeatureSet, GlobalState, RoundPlan
from fedsfr.jscc import ChannelConfig, build_jscc, pack_features
from fedsfr.logging import logger
from fedsfr.metrics import (
    ConvergenceConstants,
    MetricsLog,
    RoundMetrics,
    convergence_bound,
    cosine_similarity,
    epsilon_hat,
    evaluate,
    grad_norm_estimate,
)
from fedsfr.settings import RunConfig
from fedsfr.tensor import Tensor
from fedsfr.utils import stream


def build_dataset(config: RunConfig) -> ImageDataset:
    data = config.data
    if data.source == "idx":
        return load_idx(str(data.path))
    if data.source == "image-dir":
        return load_image_dir(str(data.path), data.format)
    return synth_dataset(stream(config.seed, "data"), data.size, tuple(data.image_shape), data.kind)


@dataclass
class RoundEnvironment:
    """Everything a round needs besides the global state, the plan and the clients."""

    config: RunConfig
    channel: ChannelConfig
    test_images: Tensor
    model_budgets: List[int]
    feature_budget: int
    delta: float
    eta_c0: float
    executor: Optional[Executor] = None
    dump_dir: Optional[Path] = None
    max_client_grad: float = 0.0
    max_server_grad: float = 0.0
    max_local_steps: int = 0
    max_server_steps: int = 0


@dataclass
class Simulation:
    config: RunConfig
    state: GlobalState
    clients: List[ClientState]
    env: RoundEnvironment

    @classmethod
    def from_config(cls, config: RunConfig, dump_dir: Optional[Path] = None) -> "Simulation":
        """Loads data, partitions it, initialises the model and derives the round budgets"""
        dataset = build_dataset(config)
        spec = PartitionSpec(
            k=config.federation.k,
            client_size=config.data.client_size,
            public_size=config.data.public_size,
            test_size=config.data.test_size,
            strategy=config.data.strategy,
        )
        shards, test = partition(dataset, spec, stream(config.seed, "partition"))

        architecture = config.model.resolved()
        model = build_jscc(
            tuple(architecture["image_shape"]),
            architecture["channels"],
            stream(config.seed, "init"),
            architecture["encoder_kernel"],
        )
        if dataset.shape != model.image_shape:
            raise ShapeMismatchError(f"Dataset images {dataset.shape} do not fit the model input {model.image_shape}")

        n = model.param_count
        federation = config.federation
        s_m = budget_from_ratio(federation.s_m_ratio, n)
        s_o = budget_from_ratio(federation.s_o_ratio, n) if federation.algorithm == "fedsfr" and federation.k_o else 0
        env = RoundEnvironment(
            config=config,
            channel=ChannelConfig(config.channel.snr_db),
            test_images=test.images,
            model_budgets=allocate_budget(model.boundaries, s_m),
            feature_budget=s_o // model.d,
            delta=s_m / n,
            eta_c0=lr_schedule(0, config.training).eta_c,
            dump_dir=dump_dir,
        )
        clients = [ClientState(shard=shard, memory=ErrorMemory.zeros(shard.client_id, n)) for shard in shards]
        logger.info(
            "N = %d parameters (theta %d), d = %d, S_m = %d, S_o = %d (%d feature vectors), %d clients",
            n,
            model.theta_size,
            model.d,
            s_m,
            s_o,
            env.feature_budget,
            len(clients),
        )
        return cls(config=config, state=GlobalState(model=model), clients=clients, env=env)

    def plan(self, t: int) -> RoundPlan:
        federation = self.config.federation
        k_m, k_o = federation.k_m, federation.k_o
        if federation.algorithm == "dsgd":
            k_m, k_o = k_m + k_o, 0
        s_m = sum(self.env.model_budgets)
        s_o = self.env.feature_budget * self.state.model.d
        return sample_round(
            stream(self.config.seed, "sampling", t),
            [client.id for client in self.clients],
            k_m,
            k_o,
            lr_schedule(t, self.config.training),
            t,
            (s_m, s_o),
            federation.grouping,
            federation.capacity_distribution,
        )

    def run(self, log: Optional[MetricsLog] = None) -> MetricsLog:
        """Runs the remaining rounds, appending to `log` as each round completes"""
        log = log if log is not None else MetricsLog()
        threads = self.config.threads
        with ThreadPoolExecutor(max_workers=threads) if threads > 1 else _Inline() as executor:
            self.env.executor = executor
            try:
                while self.state.t < self.config.training.rounds:
                    self.state, metrics = run_round(self.state, self.plan(self.state.t), self.clients, self.env)
                    log.append(metrics)
            finally:
                self.env.executor = None
        return log

    def bound_constants(self, log: MetricsLog) -> ConvergenceConstants:
        """Constants of the convergence bound as observed over the rounds in `log`

        alpha(t) is read back from the schedule as eta_c(t) * sqrt(H), beta_c is the configured
        smoothness and epsilon is the largest epsilon_hat seen.
        """
        training = self.config.training
        federation = self.config.federation
        root = math.sqrt(training.theory_horizon or training.rounds)
        k_m = federation.k_m + federation.k_o if federation.algorithm == "dsgd" else federation.k_m
        return ConvergenceConstants(
            rounds=len(log),
            alpha0=lr_schedule(0, training).eta_c * root,
            alpha_final=lr_schedule(max(len(log) - 1, 0), training).eta_c * root,
            beta_c=self.config.evaluation.smoothness,
            k=len(self.clients),
            k_m=k_m,
            e_c=self.env.max_local_steps,
            e_s=self.env.max_server_steps,
            g_k_max=self.env.max_client_grad,
            g_s=self.env.max_server_grad,
            epsilon=max(log.column("epsilon_hat"), default=0.0),
            delta=self.env.delta,
            objective_gap=log.rounds[0].train_lc if len(log) else 0.0,
        )

    def convergence_bound(self, log: MetricsLog) -> float:
        """Right-hand side of the convergence bound, or NaN when the run gives it no meaning"""
        constants = self.bound_constants(log)
        if constants.rounds < 1 or constants.k_m < 1 or constants.e_c < 1 or constants.alpha_final <= 0.0:
            return math.nan
        try:
            return convergence_bound(constants).total
        except ValueError as e:
            logger.debug("No convergence bound: %s", e)
            return math.nan


class _Inline(Executor):
    """Runs submitted work in the calling thread."""

    def map(self, fn, *iterables, timeout=None, chunksize=1):  # type: ignore[no-untyped-def, override]
        return [fn(*args) for args in zip(*iterables)]


def _client_work(
    state: GlobalState, plan: RoundPlan, client: ClientState, env: RoundEnvironment
) -> Tuple[LocalResult, Optional[FeatureSet]]:
    config = env.config
    rng = stream(config.seed, "client", plan.t, client.id)
    result = local_update(
        client,
        state.model,
        plan.eta_c,
        config.training.client_epochs,
        config.training.client_batch_size,
        env.channel,
        rng,
    )
    features = None
    if client.id in plan.a_o:
        features = make_feature_payload(client, state.model, result.final_theta, env.feature_budget, rng)
    return result, features


def _dump(env: RoundEnvironment, t: int, updates: Dict[int, SparseUpdate], features: Dict[int, FeatureSet]) -> None:
    if env.dump_dir is None:
        return
    directory = env.dump_dir / f"round_{t:04d}"
    directory.mkdir(parents=True, exist_ok=True)
    for k, sparse in updates.items():
        (directory / f"client_{k:04d}.sparse").write_bytes(encode_sparse(sparse))
    for k, feature_set in features.items():
        (directory / f"client_{k:04d}.features").write_bytes(pack_features(list(feature_set.vectors)))


def run_round(
    state: GlobalState, plan: RoundPlan, clients: List[ClientState], env: RoundEnvironment
) -> Tuple[GlobalState, RoundMetrics]:
    """One global iteration

    broadcast -> local updates (A_m and A_o) -> payloads -> aggregate A_m -> pool D_s from A_o
    -> FR update -> reset A_o memories -> metrics

    Args:
        state (GlobalState): w^(t) and t
        plan (RoundPlan): Groups, budgets and learning rates
        clients (List[ClientState]): All clients, indexed by id; memories are updated in place
        env (RoundEnvironment): Run-wide settings and diagnostics

    Returns:
        tuple: The state holding w^(t+1) and the round's metrics
    """
    started = time.perf_counter()
    config = env.config
    k = len(clients)
    w = state.w
    participants = plan.participants
    by_id = {client.id: client for client in clients}

    executor = env.executor or _Inline()
    outcomes = dict(
        zip(participants, executor.map(lambda c: _client_work(state, plan, c, env), [by_id[i] for i in participants]))
    )

    memories_before = {i: by_id[i].memory.residual for i in participants}
    updates: Dict[int, SparseUpdate] = {}
    for i in plan.a_m:
        sparse, memory = make_model_payload(by_id[i], outcomes[i][0].accum, env.model_budgets, plan.t)
        by_id[i].memory = memory
        updates[i] = sparse
    for i in plan.a_o:
        # the update never leaves the client; it enters the memory and is dropped with the reset below
        by_id[i].memory = ErrorMemory(owner=i, residual=by_id[i].memory.residual + outcomes[i][0].accum.values)

    w_half = aggregate(w, [(i, by_id[i].weight, updates[i]) for i in plan.a_m], k, len(plan.a_m))
    model_half = state.model.with_params(w_half.values)

    feature_sets = {i: outcomes[i][1] for i in plan.a_o if outcomes[i][1] is not None}
    pooled = [feature_sets[i].vectors for i in sorted(feature_sets)]
    d_s = np.concatenate(pooled) if pooled else np.zeros((0, state.model.d))
    server = server_fr_update(
        model_half,
        d_s,
        plan.eta_s,
        config.training.server_epochs,
        config.training.server_batch_size,
        env.channel,
        stream(config.seed, "server", plan.t),
    )
    model_next = state.model.with_params(server.w.values)

    passes = config.evaluation.noise_passes
    test_lc_pre, psnr_pre = evaluate(model_half, env.test_images, env.channel, config.seed, passes)
    if np.array_equal(server.w.values, w_half.values):
        test_lc_post, psnr_post = test_lc_pre, psnr_pre
    else:
        test_lc_post, psnr_post = evaluate(model_next, env.test_images, env.channel, config.seed, passes)

    a = np.zeros(len(w))
    for client in sorted(clients, key=lambda c: c.id):
        a += client.weight * client.memory.residual
    b = w_half.values - server.w.values
    eps = epsilon_hat(a, b)
    cos_ab = cosine_similarity(a, b)

    for i in plan.a_o:
        by_id[i].memory = reset_memory(by_id[i].memory)

    results = [outcomes[i][0] for i in participants]
    env.max_client_grad = max([env.max_client_grad] + [r.max_grad_norm for r in results])
    local_steps = max(r.steps for r in results)
    env.max_server_grad = max(env.max_server_grad, server.max_grad_norm)
    env.max_local_steps = max(env.max_local_steps, local_steps)
    env.max_server_steps = max(env.max_server_steps, server.steps)
    bound = lemma2_bound(env.eta_c0, local_steps, env.max_client_grad, env.delta)
    mean_mem_sq = float(np.mean([by_id[i].memory.sq_norm for i in plan.a_m])) if plan.a_m else 0.0

    grad_norm_sq = grad_norm_estimate(
        state.model,
        env.test_images,
        config.evaluation.grad_norm_budget,
        env.channel,
        stream(config.seed, "gradnorm", plan.t),
    )
    best = best_reference_update(
        w, [(i, by_id[i].weight, outcomes[i][0].accum.values, memories_before[i]) for i in participants], k
    )
    best_ref_dist = float(np.linalg.norm(best.values - server.w.values))

    _dump(env, plan.t, updates, feature_sets)

    elapsed_ms = (time.perf_counter() - started) * 1000.0
    metrics = RoundMetrics(
        t=plan.t,
        eta_c=plan.eta_c,
        eta_s=plan.eta_s,
        train_lc=float(np.mean([r.mean_loss for r in results])),
        test_lc_pre_fr=test_lc_pre,
        test_lc_post_fr=test_lc_post,
        test_psnr_pre_fr=psnr_pre,
        test_psnr_post_fr=psnr_post,
        fr_improved=test_lc_post < test_lc_pre,
        epsilon_hat=eps,
        cos_ab=cos_ab,
        mean_mem_sq=mean_mem_sq,
        lemma2_bound=bound,
        grad_norm_sq=grad_norm_sq,
        wall_ms=elapsed_ms if config.evaluation.record_wall_time else 0.0,
        best_ref_dist=best_ref_dist,
    )

    logger.info(
        "Round %d: |A_m| = %d, |A_o| = %d, eta_c = %.3g, eta_s = %.3g, PSNR %.3f -> %.3f dB, eps = %.4f (%.0f ms)",
        plan.t,
        len(plan.a_m),
        len(plan.a_o),
        plan.eta_c,
        plan.eta_s,
        psnr_pre,
        psnr_post,
        eps,
        elapsed_ms,
    )
    logger.debug("Round %d: %d local steps, |D_s| = %d, %d FR steps", plan.t, local_steps, d_s.shape[0], server.steps)
    if plan.a_o and not plan.eta_s < plan.eta_c:
        logger.warning("Round %d: eta_s = %g is not below eta_c = %g", plan.t, plan.eta_s, plan.eta_c)
    if eps > 1.0:
        logger.warning("Round %d: epsilon_hat = %.4f exceeds 1", plan.t, eps)
    if mean_mem_sq > bound:
        logger.warning("Round %d: mean ||m_k||^2 = %.4g exceeds the error-memory bound %.4g", plan.t, mean_mem_sq, bound)

    return GlobalState(model=model_next, t=plan.t + 1), metrics


def run_training(config: RunConfig, log: Optional[MetricsLog] = None) -> MetricsLog:
    """Runs T rounds of FedSFR (or DSGD when federation.algorithm is "dsgd")"""
    return Simulation.from_config(config).run(log)
