# SPDX-License-Identifier: Apache-2.0

"""Per-layer top-S sparsification and the SparseUpdate wire form"""

import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from fedsfr.exceptions import BudgetError, FormatError, ShapeMismatchError
from fedsfr.tensor import Boundaries, FlatParams, Tensor

Indices = npt.NDArray[np.int64]


@dataclass(frozen=True)
class SparseUpdate:
    """Kept (index, value) pairs per layer; indices are positions within the layer slice."""

    boundaries: Boundaries
    indices: Tuple[Indices, ...]
    values: Tuple[Tensor, ...]
    origin_round: int = 0

    def __post_init__(self) -> None:
        if not len(self.indices) == len(self.values) == len(self.boundaries):
            raise ShapeMismatchError("SparseUpdate needs one index/value array per layer")
        for (_, length), idx, vals in zip(self.boundaries, self.indices, self.values):
            if idx.shape != vals.shape:
                raise ShapeMismatchError("Index and value arrays differ in length")
            if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= length):
                raise FormatError("Sparse indices must be strictly increasing and inside their layer")

    @property
    def total_nnz(self) -> int:
        return sum(int(idx.size) for idx in self.indices)

    @property
    def size(self) -> int:
        return sum(length for _, length in self.boundaries)

    @classmethod
    def empty(cls, boundaries: Boundaries, origin_round: int = 0) -> "SparseUpdate":
        return cls(
            boundaries=boundaries,
            indices=tuple(np.zeros(0, dtype=np.int64) for _ in boundaries),
            values=tuple(np.zeros(0) for _ in boundaries),
            origin_round=origin_round,
        )


def selection_order(segment: Tensor) -> Indices:
    """Ranks entries by |value| descending, then value descending, then index ascending"""
    return np.lexsort((np.arange(segment.shape[0]), -segment, -np.abs(segment))).astype(np.int64)


def top_s_sparsify(v: FlatParams, budgets: Sequence[int], origin_round: int = 0) -> Tuple[SparseUpdate, Tensor]:
    """Keeps the budgets[i] largest-magnitude entries of every layer slice

    Kept entries are moved out of the residual, so densify(sparse) + residual == v bitwise.
    Exact zeros among the top entries are left out, so a layer may send fewer than its budget
    and densify(sparse) always has exactly total_nnz nonzeros.

    Args:
        v (FlatParams): Dense vector with its layer table
        budgets (Sequence[int]): Per-layer counts
        origin_round (int): Round tag for the update

    Returns:
        tuple: The SparseUpdate and the dense residual
    """
    if len(budgets) != len(v.boundaries):
        raise BudgetError(f"{len(budgets)} layer budgets for {len(v.boundaries)} layers")
    residual = v.values.copy()
    kept_indices: List[Indices] = []
    kept_values: List[Tensor] = []
    for (start, length), budget in zip(v.boundaries, budgets):
        if budget < 0 or budget > length:
            raise BudgetError(f"Layer budget {budget} outside [0, {length}]")
        segment = v.values[start : start + length]
        chosen = selection_order(segment)[:budget]
        # exact zeros are never sent
        kept = np.sort(chosen[segment[chosen] != 0.0])
        kept_indices.append(kept)
        kept_values.append(segment[kept].copy())
        residual[start + kept] = 0.0
    sparse = SparseUpdate(
        boundaries=v.boundaries, indices=tuple(kept_indices), values=tuple(kept_values), origin_round=origin_round
    )
    return sparse, residual


def densify(sparse: SparseUpdate, n: int) -> Tensor:
    if n != sparse.size:
        raise ShapeMismatchError(f"SparseUpdate spans {sparse.size} entries, asked for {n}")
    dense = np.zeros(n)
    for (start, _), idx, vals in zip(sparse.boundaries, sparse.indices, sparse.values):
        dense[start + idx] = vals
    return dense


def encode_sparse(sparse: SparseUpdate) -> bytes:
    """u32 layer count, then per layer u32 nnz, u32 indices[nnz], f64 values[nnz], little-endian"""
    chunks = [struct.pack("<I", len(sparse.indices))]
    for idx, vals in zip(sparse.indices, sparse.values):
        chunks.append(struct.pack("<I", idx.size))
        chunks.append(idx.astype("<u4").tobytes())
        chunks.append(vals.astype("<f8").tobytes())
    return b"".join(chunks)


def decode_sparse(payload: bytes, boundaries: Boundaries, origin_round: int = 0) -> SparseUpdate:
    cursor = 0

    def take(size: int) -> bytes:
        nonlocal cursor
        if cursor + size > len(payload):
            raise FormatError(f"Sparse payload truncated at byte {cursor}")
        chunk = payload[cursor : cursor + size]
        cursor += size
        return chunk

    (layers,) = struct.unpack("<I", take(4))
    if layers != len(boundaries):
        raise FormatError(f"Sparse payload has {layers} layers, model has {len(boundaries)}")
    indices, values = [], []
    for _ in range(layers):
        (nnz,) = struct.unpack("<I", take(4))
        indices.append(np.frombuffer(take(4 * nnz), dtype="<u4").astype(np.int64))
        values.append(np.frombuffer(take(8 * nnz), dtype="<f8").astype(np.float64))
    if cursor != len(payload):
        raise FormatError(f"{len(payload) - cursor} trailing bytes after sparse payload")
    return SparseUpdate(boundaries=boundaries, indices=tuple(indices), values=tuple(values), origin_round=origin_round)
