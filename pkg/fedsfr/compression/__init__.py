# SPDX-License-Identifier: Apache-2.0

from fedsfr.compression.budget import allocate_budget, budget_from_ratio
from fedsfr.compression.memory import ErrorMemory, build_local_update, lemma2_bound, reset_memory
from fedsfr.compression.sparse import (
    SparseUpdate,
    decode_sparse,
    densify,
    encode_sparse,
    selection_order,
    top_s_sparsify,
)

__all__ = [
    "ErrorMemory",
    "SparseUpdate",
    "allocate_budget",
    "budget_from_ratio",
    "build_local_update",
    "decode_sparse",
    "densify",
    "encode_sparse",
    "lemma2_bound",
    "reset_memory",
    "selection_order",
    "top_s_sparsify",
]
