# SPDX-License-Identifier: Apache-2.0

"""Splitting a round's top-S budget across layers"""

import math
from typing import List

from fedsfr.exceptions import BudgetError
from fedsfr.tensor import Boundaries


def budget_from_ratio(ratio: float, n: int) -> int:
    """S = floor(ratio * N), raised to 1 for any positive ratio"""
    if not 0.0 <= ratio <= 1.0:
        raise BudgetError(f"Budget ratio must lie in [0, 1], got {ratio}")
    budget = math.floor(round(ratio * n, 9))
    if ratio > 0 and budget == 0:
        budget = 1
    return min(budget, n)


def allocate_budget(boundaries: Boundaries, total: int) -> List[int]:
    """Largest-remainder split of `total` proportional to layer lengths

    Args:
        boundaries (Boundaries): Per-layer (offset, length) table
        total (int): Round budget S

    Returns:
        List[int]: Per-layer budgets summing to S, each within its layer length
    """
    lengths = [length for _, length in boundaries]
    n = sum(lengths)
    if total < 0 or total > n:
        raise BudgetError(f"Budget {total} outside [0, {n}]")
    if n == 0:
        return [0] * len(lengths)

    budgets = [total * length // n for length in lengths]
    remainders = [total * length % n for length in lengths]
    leftover = total - sum(budgets)
    for index in sorted(range(len(lengths)), key=lambda i: (-remainders[i], i))[:leftover]:
        budgets[index] += 1
    return budgets
