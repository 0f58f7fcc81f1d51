# SPDX-License-Identifier: Apache-2.0

"""Per-round client sampling and the A_m / A_o split"""

from typing import Sequence, Tuple

import numpy as np

from fedsfr.exceptions import BudgetError
from fedsfr.federation.schedule import LearningRates
from fedsfr.federation.state import RoundPlan


def draw_capacities(rng: np.random.Generator, count: int, distribution: str) -> np.ndarray:
    if distribution == "uniform":
        return rng.uniform(0.0, 1.0, size=count)
    if distribution == "rayleigh":
        return rng.rayleigh(1.0, size=count)
    raise ValueError(f"Unknown capacity distribution {distribution!r}")


def split_groups(
    rng: np.random.Generator, chosen: np.ndarray, k_m: int, grouping: str, distribution: str
) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Puts the k_m best-capacity (or k_m random) sampled clients in A_m and the rest in A_o"""
    if grouping == "capacity":
        capacities = draw_capacities(rng, chosen.shape[0], distribution)
        order = np.argsort(-capacities, kind="stable")
    elif grouping == "random":
        order = rng.permutation(chosen.shape[0])
    else:
        raise ValueError(f"Unknown grouping policy {grouping!r}")
    a_m = tuple(sorted(int(k) for k in chosen[order[:k_m]]))
    a_o = tuple(sorted(int(k) for k in chosen[order[k_m:]]))
    return a_m, a_o


def sample_round(
    rng: np.random.Generator,
    population: Sequence[int],
    k_m: int,
    k_o: int,
    rates: LearningRates,
    t: int,
    budgets: Tuple[int, int],
    grouping: str = "capacity",
    distribution: str = "uniform",
) -> RoundPlan:
    """Draws K_m + K_o distinct clients uniformly without replacement and splits them

    Args:
        rng (np.random.Generator): Sampling stream for round t
        population (Sequence[int]): All client ids
        k_m (int): Model-update clients
        k_o (int): Feature clients
        rates (LearningRates): eta_c, eta_s for the round
        t (int): Round index
        budgets (tuple): (S_m, S_o)
        grouping (str): "capacity" or "random"
        distribution (str): Capacity distribution, "uniform" or "rayleigh"

    Returns:
        RoundPlan: The round's groups, budgets and learning rates
    """
    if k_m < 0 or k_o < 0 or k_m + k_o > len(population):
        raise BudgetError(f"Cannot sample K_m = {k_m} and K_o = {k_o} from {len(population)} clients")
    chosen = rng.choice(np.asarray(population, dtype=np.int64), size=k_m + k_o, replace=False)
    a_m, a_o = split_groups(rng, chosen, k_m, grouping, distribution)
    s_m, s_o = budgets
    return RoundPlan(t=t, a_m=a_m, a_o=a_o, s_m=s_m, s_o=s_o, eta_c=rates.eta_c, eta_s=rates.eta_s)
