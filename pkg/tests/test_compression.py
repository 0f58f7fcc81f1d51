# SPDX-License-Identifier: Apache-2.0

import numpy as np
import pytest

from fedsfr.compression import (
    ErrorMemory,
    SparseUpdate,
    allocate_budget,
    budget_from_ratio,
    build_local_update,
    decode_sparse,
    densify,
    encode_sparse,
    lemma2_bound,
    reset_memory,
    top_s_sparsify,
)
from fedsfr.exceptions import BudgetError, FormatError
from fedsfr.tensor import FlatParams
from fedsfr.tensor.network import boundaries_for


def flat(values, lengths=None) -> FlatParams:
    values = np.asarray(values, dtype=np.float64)
    return FlatParams(values=values, boundaries=boundaries_for(lengths or [values.shape[0]]))


def test_top_s_keeps_largest_magnitudes():
    sparse, residual = top_s_sparsify(flat([0.5, -2.0, 0.1, 1.5]), [2])
    assert sparse.indices[0].tolist() == [1, 3]
    assert sparse.values[0].tolist() == [-2.0, 1.5]
    assert residual.tolist() == [0.5, 0.0, 0.1, 0.0]


def test_top_s_breaks_magnitude_ties_toward_positive_then_lowest_index():
    sparse, _ = top_s_sparsify(flat([1.0, -1.0, 1.0]), [2])
    assert sparse.indices[0].tolist() == [0, 2]

    sparse, _ = top_s_sparsify(flat([0.5, 0.5, 0.5, 0.5]), [2])
    assert sparse.indices[0].tolist() == [0, 1]


def test_top_s_matches_sort_oracle(rng):
    for _ in range(20):
        v = rng.normal(size=10_000)
        s = int(rng.integers(0, 10_001))
        sparse, _ = top_s_sparsify(flat(v), [s])
        oracle = sorted(range(v.size), key=lambda i: (-abs(v[i]), -v[i], i))[:s]
        assert sparse.indices[0].tolist() == sorted(oracle)


def test_top_s_is_per_layer():
    sparse, residual = top_s_sparsify(flat([9.0, 8.0, 0.1, 0.2], [2, 2]), [1, 1])
    assert [idx.tolist() for idx in sparse.indices] == [[0], [1]]
    assert residual.tolist() == [0.0, 8.0, 0.1, 0.0]


def test_top_s_never_sends_exact_zeros():
    sparse, residual = top_s_sparsify(flat([0.0, 1.0, 0.0]), [3])
    assert sparse.indices[0].tolist() == [1]
    assert sparse.total_nnz == 1
    dense = densify(sparse, 3)
    assert np.count_nonzero(dense) == sparse.total_nnz
    assert dense.tolist() == [0.0, 1.0, 0.0]
    assert not np.any(residual)


def test_top_s_rejects_bad_budgets():
    with pytest.raises(BudgetError):
        top_s_sparsify(flat([1.0, 2.0]), [3])
    with pytest.raises(BudgetError):
        top_s_sparsify(flat([1.0, 2.0]), [1, 1])


def test_budget_from_ratio():
    assert budget_from_ratio(0.4, 1301) == 520
    assert budget_from_ratio(0.1, 1301) == 130
    assert budget_from_ratio(0.001, 100) == 1
    assert budget_from_ratio(0.0, 100) == 0
    assert budget_from_ratio(1.0, 100) == 100
    with pytest.raises(BudgetError):
        budget_from_ratio(1.5, 100)


def test_allocate_budget_largest_remainder():
    assert allocate_budget(boundaries_for([10, 30]), 5) == [1, 4]
    assert allocate_budget(boundaries_for([1, 1, 1]), 2) == [1, 1, 0]
    assert allocate_budget(boundaries_for([4, 6]), 10) == [4, 6]
    assert allocate_budget(boundaries_for([4, 6]), 0) == [0, 0]
    with pytest.raises(BudgetError):
        allocate_budget(boundaries_for([4, 6]), 11)


def test_allocate_budget_sums_and_stays_within_layers(desk_model, rng):
    boundaries = desk_model.boundaries
    for total in rng.integers(0, desk_model.param_count + 1, size=50):
        budgets = allocate_budget(boundaries, int(total))
        assert sum(budgets) == total
        assert all(0 <= b <= n for b, (_, n) in zip(budgets, boundaries))


def test_local_update_from_zero_memory():
    memory = ErrorMemory.zeros(owner=0, n=4)
    sparse, new_memory = build_local_update(flat([0.5, -2.0, 0.1, 1.5]), memory, [2])
    assert densify(sparse, 4).tolist() == [0.0, -2.0, 0.0, 1.5]
    assert new_memory.residual.tolist() == [0.5, 0.0, 0.1, 0.0]
    assert new_memory.owner == 0


def test_full_budget_leaves_no_memory(rng):
    accum = flat(rng.normal(size=64))
    sparse, memory = build_local_update(accum, ErrorMemory.zeros(3, 64), [64])
    assert np.array_equal(densify(sparse, 64), accum.values)
    assert not np.any(memory.residual)


def test_error_feedback_is_exact_and_telescopes(rng):
    memory = ErrorMemory.zeros(0, 200)
    sent = np.zeros(200)
    total_accum = np.zeros(200)
    for t in range(100):
        accum = flat(rng.normal(size=200), [50, 150])
        sparse, new_memory = build_local_update(accum, memory, [5, 15], origin_round=t)
        dense = densify(sparse, 200)
        assert sparse.total_nnz == 20
        assert sparse.origin_round == t
        assert np.array_equal(new_memory.residual + dense, memory.residual + accum.values)
        sent += dense
        total_accum += accum.values
        memory = new_memory
    assert np.allclose(sent + memory.residual, total_accum)


@pytest.mark.parametrize("budget", [0, 1, 20, 117, 199, 200])
def test_sparsification_never_grows_the_memory(rng, budget):
    boundaries = boundaries_for([50, 150])
    budgets = allocate_budget(boundaries, budget)
    for _ in range(10):
        memory = ErrorMemory(owner=1, residual=rng.normal(scale=0.1, size=200))
        accum = FlatParams(values=rng.normal(size=200), boundaries=boundaries)
        corrected = memory.residual + accum.values

        sparse, new_memory = build_local_update(accum, memory, budgets)
        assert np.linalg.norm(new_memory.residual) <= np.linalg.norm(corrected)
        assert np.array_equal(densify(sparse, 200) + new_memory.residual, corrected)
        for (start, length), idx in zip(boundaries, sparse.indices):
            left = np.abs(new_memory.residual[start : start + length])
            if idx.size and left.any():
                assert np.abs(corrected[start + idx]).min() >= left.max()


def test_reset_memory():
    memory = ErrorMemory(owner=2, residual=np.array([1.0, -3.0]))
    assert memory.sq_norm == 10.0
    cleared = reset_memory(memory)
    assert cleared.owner == 2
    assert cleared.residual.tolist() == [0.0, 0.0]


def test_densify():
    boundaries = boundaries_for([3, 2])
    assert not np.any(densify(SparseUpdate.empty(boundaries), 5))

    update = SparseUpdate(
        boundaries=boundaries,
        indices=(np.array([2]), np.array([0, 1])),
        values=(np.array([4.0]), np.array([5.0, 6.0])),
    )
    dense = densify(update, 5)
    assert dense.tolist() == [0.0, 0.0, 4.0, 5.0, 6.0]
    assert np.count_nonzero(dense) == update.total_nnz


def test_sparse_update_rejects_unordered_indices():
    with pytest.raises(FormatError):
        SparseUpdate(boundaries=boundaries_for([3]), indices=(np.array([2, 1]),), values=(np.array([1.0, 2.0]),))
    with pytest.raises(FormatError):
        SparseUpdate(boundaries=boundaries_for([3]), indices=(np.array([3]),), values=(np.array([1.0]),))


def test_sparse_wire_form(rng):
    sparse, _ = top_s_sparsify(flat(rng.normal(size=30), [10, 20]), [3, 4], origin_round=5)
    payload = encode_sparse(sparse)
    assert len(payload) == 4 + (4 + 3 * 12) + (4 + 4 * 12)

    decoded = decode_sparse(payload, sparse.boundaries, origin_round=5)
    assert [i.tolist() for i in decoded.indices] == [i.tolist() for i in sparse.indices]
    assert [v.tobytes() for v in decoded.values] == [v.tobytes() for v in sparse.values]

    with pytest.raises(FormatError):
        decode_sparse(payload[:-1], sparse.boundaries)
    with pytest.raises(FormatError):
        decode_sparse(payload, boundaries_for([30]))


def test_lemma2_bound():
    assert lemma2_bound(0.01, 3, 1.0, 1.0) == 0.0
    assert lemma2_bound(0.01, 3, 1.0, 0.5) == pytest.approx(7.2e-3)
    assert lemma2_bound(0.01, 3, 1.0, 0.1) > lemma2_bound(0.01, 3, 1.0, 0.5)
    with pytest.raises(BudgetError):
        lemma2_bound(0.01, 3, 1.0, 0.0)
