# SPDX-License-Identifier: Apache-2.0

"""Oracle suites run by `simulate.py check`"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from fedsfr.compression import (
    ErrorMemory,
    SparseUpdate,
    allocate_budget,
    build_local_update,
    densify,
    top_s_sparsify,
)
from fedsfr.data import minibatches
from fedsfr.exceptions import NonFiniteError
from fedsfr.federation import Simulation, aggregate
from fedsfr.jscc import ChannelConfig, apply_awgn, build_jscc, channel_noise, fr_loss_and_grad, transmit_loss_and_grad
from fedsfr.logging import logger
from fedsfr.metrics import (
    MetricsLog,
    early_threshold,
    early_violations,
    improvement_ratio,
    lemma2_margin,
    mean_curve,
    psnr_curve,
    rounds_to_reach,
)
from fedsfr.settings import RunConfig
from fedsfr.tensor import (
    Conv2d,
    Dense,
    FlatParams,
    LayerSpec,
    ReLU,
    Reshape,
    Sigmoid,
    Tensor,
    TransposeConv2d,
    backward,
    forward,
    init_network,
)
from fedsfr.tensor.gradcheck import numerical_gradient, relative_error
from fedsfr.tensor.network import boundaries_for
from fedsfr.utils import deep_merge, stream

GRAD_TOLERANCE = 1e-6
LAYER_INSTANCES = 20
JSCC_INSTANCES = 5
JSCC_COORDINATES = 30


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _layer_cases() -> List[Tuple[LayerSpec, Tuple[int, ...]]]:
    return [
        (Dense(5, 3), (5,)),
        (Conv2d(2, 3, 3, stride=2, padding=1), (2, 5, 5)),
        (TransposeConv2d(2, 3, 4, stride=2, padding=1), (2, 3, 3)),
        (ReLU(), (2, 3, 3)),
        (Sigmoid(), (2, 3, 3)),
        (Reshape((18,)), (2, 3, 3)),
    ]


def _layer_errors(layer: LayerSpec, input_shape: Tuple[int, ...], rng: np.random.Generator) -> Tuple[float, float]:
    net = init_network(input_shape, [layer], rng)
    if net.param_count:
        net = net.with_flat(rng.normal(size=net.param_count))
    x = rng.normal(size=(2,) + input_shape)
    weights = rng.normal(size=(2,) + net.output_shape)

    def loss_of(output: Tensor) -> float:
        return float(np.sum(output * weights))

    _, tape = forward(net, x)
    grads, input_grad = backward(net, tape, weights)

    param_error = 0.0
    if net.param_count:
        numeric = numerical_gradient(lambda v: loss_of(forward(net.with_flat(v), x)[0]), net.flatten().values)
        param_error = relative_error(grads.values, numeric)
    numeric_input = numerical_gradient(lambda v: loss_of(forward(net, v.reshape(x.shape))[0]), x.ravel())
    return param_error, relative_error(input_grad.ravel(), numeric_input)


def check_gradients(config: RunConfig) -> CheckResult:
    """Backward vs central differences on every layer kind and on both JSCC loss paths"""
    rng = stream(config.seed, "check", 0)
    worst = 0.0
    instances = 0
    for layer, input_shape in _layer_cases():
        for _ in range(LAYER_INSTANCES):
            worst = max(worst, *_layer_errors(layer, input_shape, rng))
            instances += 1

    architecture = config.model.resolved()
    for _ in range(JSCC_INSTANCES):
        model = build_jscc(tuple(architecture["image_shape"]), architecture["channels"], rng, architecture["encoder_kernel"])
        w = model.params.values
        coordinates = np.sort(rng.choice(w.shape[0], size=min(JSCC_COORDINATES, w.shape[0]), replace=False))
        images = rng.uniform(size=(2,) + model.image_shape)
        noise = 0.1 * rng.normal(size=(2, model.d))
        _, _, grads = transmit_loss_and_grad(model, images, noise)
        numeric = numerical_gradient(
            lambda v: transmit_loss_and_grad(model.with_params(v), images, noise, False)[1], w, coordinates
        )
        assert grads is not None
        worst = max(worst, relative_error(grads.values[coordinates], numeric[coordinates]))

        features = rng.normal(size=(2, model.d))
        _, _, grads = fr_loss_and_grad(model, features, noise)
        numeric = numerical_gradient(lambda v: fr_loss_and_grad(model.with_params(v), features, noise, False)[1], w, coordinates)
        assert grads is not None
        worst = max(worst, relative_error(grads.values[coordinates], numeric[coordinates]))
        instances += 2
    return CheckResult("grad", worst < GRAD_TOLERANCE, f"{instances} instances, worst relative error {worst:.3e}")


def _sort_oracle(v: Tensor, budget: int) -> List[int]:
    ranked = sorted(range(v.shape[0]), key=lambda i: (-abs(v[i]), -v[i], i))
    return sorted(i for i in ranked[:budget] if v[i] != 0.0)


def check_topk(config: RunConfig, vectors: int = 1000) -> CheckResult:
    """Kept sets match a full-sort oracle, including vectors full of ties"""
    rng = stream(config.seed, "check", 1)
    mismatches = 0
    for index in range(vectors):
        n = int(rng.integers(1, 200))
        v = rng.integers(-3, 4, size=n) / 2.0 if index % 2 else rng.normal(size=n)
        budget = int(rng.integers(0, n + 1))
        flat = FlatParams(values=v, boundaries=boundaries_for([n]))
        sparse, residual = top_s_sparsify(flat, [budget])
        if sparse.indices[0].tolist() != _sort_oracle(v, budget) or not np.array_equal(residual + densify(sparse, n), v):
            mismatches += 1
    return CheckResult("topk", mismatches == 0, f"{mismatches} mismatches over {vectors} vectors")


def check_memory(config: RunConfig, rounds: int = 100, clients: int = 10) -> CheckResult:
    """m^(t+1) + densify(g^t) == m^t + accum^t bitwise, with exactly S entries sent"""
    rng = stream(config.seed, "check", 2)
    boundaries = boundaries_for([40, 8, 24, 3])
    n = sum(length for _, length in boundaries)
    memories = [ErrorMemory.zeros(k, n) for k in range(clients)]
    failures: List[str] = []
    for t in range(rounds):
        for k in range(clients):
            accum = FlatParams(values=rng.normal(scale=0.1, size=n), boundaries=boundaries)
            budget = int(rng.integers(0, n + 1))
            sparse, memory = build_local_update(accum, memories[k], allocate_budget(boundaries, budget), t)
            if sparse.total_nnz != budget:
                failures.append(f"round {t} client {k}: sent {sparse.total_nnz} entries for S = {budget}")
            if not np.array_equal(memory.residual + densify(sparse, n), memories[k].residual + accum.values):
                failures.append(f"round {t} client {k}: error-feedback identity broken")
            memories[k] = memory
    detail = failures[0] if failures else f"{rounds} rounds x {clients} clients exact"
    return CheckResult("memory", not failures, detail)


def _naive_aggregate(w: Tensor, updates: Sequence[Tuple[int, float, SparseUpdate]], k: int, k_m: int) -> Tensor:
    total = [0.0] * w.shape[0]
    for _, weight, sparse in sorted(updates, key=lambda u: u[0]):
        for (start, _), idx, vals in zip(sparse.boundaries, sparse.indices, sparse.values):
            for i, value in zip(idx.tolist(), vals.tolist()):
                total[start + i] += weight * value
    scale = k / k_m
    return np.array([w[i] - scale * total[i] for i in range(w.shape[0])])


def check_aggregate(config: RunConfig, trials: int = 50) -> CheckResult:
    """aggregate() against an element-by-element loop, bitwise"""
    rng = stream(config.seed, "check", 3)
    boundaries = boundaries_for([30, 5, 12])
    n = sum(length for _, length in boundaries)
    for _ in range(trials):
        k = int(rng.integers(2, 12))
        k_m = int(rng.integers(1, k + 1))
        weights = rng.dirichlet(np.ones(k))
        ids = rng.choice(k, size=k_m, replace=False)
        updates = []
        for i in ids:
            dense = FlatParams(values=rng.normal(size=n), boundaries=boundaries)
            sparse, _ = top_s_sparsify(dense, allocate_budget(boundaries, int(rng.integers(0, n + 1))))
            updates.append((int(i), float(weights[i]), sparse))
        w = FlatParams(values=rng.normal(size=n), boundaries=boundaries)
        if not np.array_equal(aggregate(w, updates, k, k_m).values, _naive_aggregate(w.values, updates, k, k_m)):
            return CheckResult("aggregate", False, f"aggregate differs from the loop oracle for K = {k}, K_m = {k_m}")
    return CheckResult("aggregate", True, f"{trials} aggregations bitwise equal")


def fedavg_config(config: RunConfig, rounds: int = 20) -> RunConfig:
    federation = config.federation
    overrides = {
        "federation": {"algorithm": "fedsfr", "k_m": federation.k, "k_o": 0, "s_m_ratio": 1.0, "s_o_ratio": 0.0},
        "training": {"rounds": rounds, "server_epochs": 0},
        "output": {"dump_updates": False},
    }
    return RunConfig.model_validate(deep_merge(config.model_dump(), overrides))


def plain_fedavg(config: RunConfig) -> Tensor:
    """Independent FedAvg loop over the clients and initial model of a simulation"""
    sim = Simulation.from_config(config)
    model = sim.state.model
    channel = ChannelConfig(config.channel.snr_db)
    training = config.training
    w = model.params.values.copy()
    for t in range(training.rounds):
        eta = training.eta_c0 * training.decay ** (t // training.decay_every)
        total = np.zeros_like(w)
        for client in sim.clients:
            rng = stream(config.seed, "client", t, client.id)
            local = w.copy()
            for batch in minibatches(len(client.data), training.client_batch_size, rng, training.client_epochs):
                noise = channel_noise((batch.shape[0], model.d), channel, rng)
                _, _, grads = transmit_loss_and_grad(model.with_params(local), client.data.images[batch], noise)
                assert grads is not None
                local = local - eta * grads.values
            total += client.weight * (w - local)
        w = w - total
    return w


def check_fedavg(config: RunConfig) -> CheckResult:
    """K_o = 0, E_s = 0, S = N reduces FedSFR to FedAvg, bitwise"""
    reduced = fedavg_config(config)
    sim = Simulation.from_config(reduced)
    sim.run()
    expected = plain_fedavg(reduced)
    same = np.array_equal(sim.state.model.params.values, expected)
    gap = float(np.max(np.abs(sim.state.model.params.values - expected)))
    return CheckResult("fedavg", same, f"{reduced.training.rounds} rounds, max deviation {gap:.3e}")


def check_sampling(config: RunConfig, draws: int = 100_000, k: int = 10, m: int = 4, dims: int = 5) -> CheckResult:
    """(K/m) sum_{B0} p_k x_k averages to sum p_k x_k under uniform sampling without replacement"""
    rng = stream(config.seed, "check", 4)
    weights = rng.dirichlet(np.ones(k))
    x = rng.uniform(1.0, 2.0, size=(k, dims))
    weighted = weights[:, None] * x
    subsets = rng.random((draws, k)).argsort(axis=1)[:, :m]
    mean = (k / m) * weighted[subsets].sum(axis=1).mean(axis=0)
    target = weighted.sum(axis=0)
    worst = float(np.max(np.abs(mean - target) / np.abs(target)))
    return CheckResult("sampling", worst < 0.01, f"{draws} draws, worst relative error {worst:.3e}")


def check_channel(config: RunConfig, samples: int = 1_000_000) -> CheckResult:
    rng = stream(config.seed, "check", 5)
    cfg = ChannelConfig(20.0)
    variance = float(np.var(apply_awgn(np.zeros(samples), cfg, rng)))
    round_trip = all(
        math.isclose(ChannelConfig.from_sigma2(s).sigma2, s, rel_tol=1e-12) for s in (1e-4, 0.01, 0.5, 1.0, 3.0)
    )
    passed = 0.0099 <= variance <= 0.0101 and round_trip and math.isclose(cfg.sigma2, 0.01, rel_tol=1e-12)
    return CheckResult("channel", passed, f"empirical variance {variance:.6f} at sigma2 = {cfg.sigma2:g}")


TREND_TOLERANCE_DB = 0.2
TREND_VIOLATIONS = 0.1


def _trend_run(config: RunConfig, overrides: Dict[str, Any]) -> Tuple[MetricsLog, Simulation]:
    """One run for the trend suite; a run that blows up keeps the rounds it completed"""
    point = RunConfig.model_validate(deep_merge(config.model_dump(), overrides))
    sim = Simulation.from_config(point)
    log = MetricsLog()
    try:
        sim.run(log)
    except NonFiniteError as e:
        logger.warning("Trend run %s stopped after %d rounds: %s", overrides, len(log), e)
    return log, sim


def trend_settings(config: RunConfig) -> Dict[str, Dict[str, Any]]:
    """Named overrides for the trend runs; every seed runs each of them"""
    eta_c0 = config.training.eta_c0
    base = {"federation": {"algorithm": "fedsfr"}, "training": {"eta_s0": 0.1 * eta_c0}}
    feature_heavy = max(config.sweep.splits, key=lambda split: (split[1], -split[0]))
    model_heavy = max(config.sweep.splits, key=lambda split: (split[0], -split[1]))
    return {
        "fedsfr": base,
        "dsgd": deep_merge(base, {"federation": {"algorithm": "dsgd"}}),
        "fast_server": deep_merge(base, {"training": {"eta_s0": 10.0 * eta_c0}}),
        "feature_heavy": deep_merge(base, {"federation": {"k_m": feature_heavy[0], "k_o": feature_heavy[1]}}),
        "model_heavy": deep_merge(base, {"federation": {"k_m": model_heavy[0], "k_o": model_heavy[1]}}),
    }


def check_trends(config: RunConfig) -> CheckResult:
    """Desk-scale dynamics averaged over sweep.seeds

    Runs FedSFR with eta_s(0) = 0.1 eta_c(0), DSGD, FedSFR with eta_s(0) = 10 eta_c(0) and the most
    feature-heavy and most model-heavy splits of sweep.splits, then compares their PSNR curves.
    """
    rounds = config.training.rounds
    curves: Dict[str, List[np.ndarray]] = {}
    base_logs: List[MetricsLog] = []
    bounds: List[float] = []
    for seed in config.sweep.seeds:
        for name, overrides in trend_settings(config).items():
            log, sim = _trend_run(config, deep_merge({"seed": seed}, overrides))
            curves.setdefault(name, []).append(psnr_curve(log, rounds))
            if name == "fedsfr":
                base_logs.append(log)
                bounds.append(sim.convergence_bound(log))
    mean = {name: mean_curve(runs) for name, runs in curves.items()}

    margins = [lemma2_margin(log) if len(log) else math.inf for log in base_logs]
    memory_ok = float(np.mean(margins)) <= 1.0 and max(margins) <= 2.0

    violations = early_violations(mean["fedsfr"], mean["dsgd"], TREND_TOLERANCE_DB)
    early_ok = violations is not None and violations <= TREND_VIOLATIONS

    ratio = float(np.mean([improvement_ratio(log) if len(log) else 0.0 for log in base_logs]))
    improvement_ok = ratio > 0.5

    server_rate_ok = bool(mean["fast_server"][-1] < mean["fedsfr"][-1])

    threshold = early_threshold(mean["feature_heavy"], mean["model_heavy"])
    feature_reach = rounds_to_reach(mean["feature_heavy"], threshold)
    model_reach = rounds_to_reach(mean["model_heavy"], threshold)
    split_ok = (
        feature_reach is not None
        and (model_reach is None or feature_reach < model_reach)
        and bool(mean["model_heavy"][-1] >= mean["feature_heavy"][-1])
    )

    pooled = [eps for log in base_logs for eps in log.column("epsilon_hat")]
    median_eps = float(np.median(pooled)) if pooled else math.inf
    epsilon_ok = median_eps < 1.0

    outcomes = {
        "memory": memory_ok,
        "early": early_ok,
        "improvement": improvement_ok,
        "server-rate": server_rate_ok,
        "split": split_ok,
        "epsilon": epsilon_ok,
    }
    for name, passed in outcomes.items():
        logger.debug("trends %s: %s", name, "ok" if passed else "failed")
    failed = [name for name, passed in outcomes.items() if not passed]
    shortfall = "over tolerance" if violations is None else f"{violations:.2f}"
    detail = (
        f"{len(config.sweep.seeds)} seeds, memory-bound margin {np.mean(margins):.3f} (max {max(margins):.3f}), "
        f"early shortfall fraction {shortfall}, "
        f"improvement ratio {ratio:.3f}, final PSNR {mean['fast_server'][-1]:.2f} dB at 10x vs "
        f"{mean['fedsfr'][-1]:.2f} dB at 0.1x, threshold {threshold:.2f} dB reached at {feature_reach} vs {model_reach}, "
        f"median epsilon_hat {median_eps:.4f}, convergence bound {np.mean(bounds):.4g}"
    )
    if failed:
        detail += f"; failed: {', '.join(failed)}"
    return CheckResult("trends", not failed, detail)


SUITES: Dict[str, Callable[[RunConfig], CheckResult]] = {
    "grad": check_gradients,
    "topk": check_topk,
    "memory": check_memory,
    "aggregate": check_aggregate,
    "fedavg": check_fedavg,
    "sampling": check_sampling,
    "channel": check_channel,
    "trends": check_trends,
}
# trends runs only when named with --only
DEFAULT_SUITES = [name for name in SUITES if name != "trends"]


def run_checks(config: RunConfig, only: Optional[Sequence[str]] = None) -> List[CheckResult]:
    results = []
    for name in only or DEFAULT_SUITES:
        result = SUITES[name](config)
        logger.info("%s %s: %s", "PASS" if result.passed else "FAIL", result.name, result.detail)
        results.append(result)
    return results
