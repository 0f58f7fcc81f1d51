# SPDX-License-Identifier: Apache-2.0

"""Error-feedback memory m_k and the local update g_k built from it"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from fedsfr.compression.sparse import SparseUpdate, top_s_sparsify
from fedsfr.exceptions import BudgetError, ShapeMismatchError
from fedsfr.tensor import FlatParams, Tensor


@dataclass(frozen=True)
class ErrorMemory:
    owner: int
    residual: Tensor

    @classmethod
    def zeros(cls, owner: int, n: int) -> "ErrorMemory":
        return cls(owner=owner, residual=np.zeros(n))

    @property
    def sq_norm(self) -> float:
        return float(np.dot(self.residual, self.residual))


def build_local_update(
    accum: FlatParams, memory: ErrorMemory, budgets: Sequence[int], origin_round: int = 0
) -> Tuple[SparseUpdate, ErrorMemory]:
    """g = top_S(m + accum) and m' = m + accum - densify(g)

    Args:
        accum (FlatParams): eta_c times the client's summed gradients for the round
        memory (ErrorMemory): Residual carried from earlier rounds
        budgets (Sequence[int]): Per-layer top-S counts
        origin_round (int): Round index

    Returns:
        tuple: The sparse update and the new memory
    """
    if memory.residual.shape != accum.values.shape:
        raise ShapeMismatchError(f"Memory length {memory.residual.shape} does not match update {accum.values.shape}")
    corrected = accum.replace(memory.residual + accum.values)
    sparse, residual = top_s_sparsify(corrected, budgets, origin_round)
    return sparse, ErrorMemory(owner=memory.owner, residual=residual)


def reset_memory(memory: ErrorMemory) -> ErrorMemory:
    return ErrorMemory.zeros(memory.owner, memory.residual.shape[0])


def lemma2_bound(eta0: float, ec: int, gk: float, delta: float) -> float:
    """Upper bound 4(1 - delta)/delta^2 * eta0^2 Ec^2 Gk^2 on E||m_k||^2 for top-S with delta = S/N"""
    if not 0.0 < delta <= 1.0:
        raise BudgetError(f"delta must lie in (0, 1], got {delta}")
    return 4.0 * (1.0 - delta) / (delta * delta) * eta0 * eta0 * ec * ec * gk * gk
