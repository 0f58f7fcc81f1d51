# SPDX-License-Identifier: Apache-2.0

"""Right-hand side of the O(1/sqrt(T)) convergence bound, as a diagnostic"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ConvergenceConstants:
    rounds: int
    alpha0: float
    alpha_final: float
    beta_c: float
    k: int
    k_m: int
    e_c: int
    e_s: int
    g_k_max: float
    g_s: float
    epsilon: float
    delta: float
    objective_gap: float


@dataclass(frozen=True)
class ConvergenceBound:
    a: float
    b: float
    c: float
    total: float


def convergence_bound(constants: ConvergenceConstants) -> ConvergenceBound:
    """Bound on (1/T) sum_t E||grad F(w^t)||^2 for eta_c = alpha(t)/sqrt(T), eta_s = alpha(t)/T^(3/4)

    total = (2 gap / alpha(T) + A + B / sqrt(T) + C / T) / sqrt(T)
    """
    c = constants
    if c.rounds < 1 or c.k_m < 1:
        raise ValueError("Need at least one round and one model-update client")
    if not 0.0 < c.delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {c.delta}")
    gk2 = c.g_k_max**2
    gs2 = c.g_s**2
    ratio = c.alpha0 / c.alpha_final
    memory = 16.0 * (1.0 - c.delta) / (c.delta * c.delta)

    a = 2.0 * c.alpha0 * c.beta_c * (c.k / c.k_m) * c.e_c**2 * gk2 + ratio**2 * (c.e_s**2 / c.e_c) * gs2
    b = (
        c.alpha0**2 * c.beta_c**2 * (((c.k - c.k_m) ** 2 / c.k_m**2 + c.epsilon) * memory + 2.0 / 3.0) * c.e_c**3 * gk2
        + 2.0 * c.alpha0**2 / c.alpha_final * c.beta_c * c.e_s**2 * gs2
    )
    term_c = 4.0 * c.alpha0**2 * c.epsilon * c.beta_c**2 * c.e_c * c.e_s**2 * gs2

    root = math.sqrt(c.rounds)
    total = (2.0 / c.alpha_final * c.objective_gap + a + b / root + term_c / c.rounds) / root
    return ConvergenceBound(a=a, b=b, c=term_c, total=total)
