import math
from functools import lru_cache

import numpy as np
import pytest

from app.models.geometry import INFEASIBLE, CostMatrix
from app.utils.assignment import solve


def _brute_force(entries: np.ndarray, threshold: float):
    """Best matching over every partial matching that respects the gate: most pairs, then least cost."""
    rows, cols = entries.shape

    @lru_cache(maxsize=None)
    def best(r: int, used: int):
        if r == rows:
            return 0, 0.0, ()
        count, cost, pairs = best(r + 1, used)
        for c in range(cols):
            v = entries[r, c]
            if used & (1 << c) or not (math.isfinite(v) and v <= threshold):
                continue
            sub_count, sub_cost, sub_pairs = best(r + 1, used | (1 << c))
            if (sub_count + 1, -(sub_cost + v)) > (count, -cost):
                count, cost, pairs = sub_count + 1, sub_cost + v, ((r, c),) + sub_pairs
        return count, cost, pairs

    count, _, pairs = best(0, 0)
    return count, math.fsum(entries[r, c] for r, c in pairs)


def _check_partition(result, rows, cols):
    matched_rows = [r for r, _, _ in result.matches]
    matched_cols = [c for _, c, _ in result.matches]
    assert len(set(matched_rows)) == len(matched_rows)
    assert len(set(matched_cols)) == len(matched_cols)
    assert sorted(matched_rows + result.unmatched_rows) == list(range(rows))
    assert sorted(matched_cols + result.unmatched_cols) == list(range(cols))


def test_diagonal_optimum():
    result = solve(CostMatrix.build(np.array([[0.0, 1.0], [1.0, 0.0]])), 10)
    assert result.matches == [(0, 0, 0.0), (1, 1, 0.0)]
    assert result.unmatched_rows == [] and result.unmatched_cols == []


def test_gate_rejection():
    result = solve(CostMatrix.build(np.array([[0.9]])), 0.8)
    assert result.matches == []
    assert result.unmatched_rows == [0]
    assert result.unmatched_cols == [0]


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        solve(CostMatrix.build(np.zeros((1, 1))), -0.1)


@pytest.mark.parametrize("shape", [(0, 0), (0, 3), (3, 0)])
def test_empty_matrices(shape):
    result = solve(CostMatrix.build(np.zeros(shape)), 1.0)
    assert result.matches == []
    assert result.unmatched_rows == list(range(shape[0]))
    assert result.unmatched_cols == list(range(shape[1]))


def test_ids_are_carried_through():
    cost = CostMatrix(np.array([[0.2, 0.1]]), row_ids=[7], col_ids=["a", "b"])
    result = solve(cost, 1.0)
    assert result.matches == [(7, "b", 0.1)]
    assert result.unmatched_cols == ["a"]


def test_pre_gating_keeps_matchable_pairs():
    # the unconstrained optimum pairs (0,0) and (1,1) but (1,1) is gated out
    entries = np.array([[0.1, 0.3], [0.2, 0.9]])
    result = solve(CostMatrix.build(entries), 0.5)
    assert sorted((r, c) for r, c, _ in result.matches) == [(0, 1), (1, 0)]


def test_matches_brute_force_oracle(rng):
    for _ in range(1000):
        rows, cols = (int(v) for v in rng.integers(0, 8, size=2))
        entries = rng.uniform(0, 1, size=(rows, cols))
        entries[rng.random(size=(rows, cols)) < 0.1] = INFEASIBLE
        threshold = float(rng.uniform(0, 1))
        result = solve(CostMatrix.build(entries), threshold)

        _check_partition(result, rows, cols)
        for r, c, v in result.matches:
            assert math.isfinite(v) and v <= threshold
            assert v == entries[r, c]

        count, cost = _brute_force(entries, threshold)
        assert len(result.matches) == count
        assert result.total_cost == cost


def test_permutation_preserves_total(rng):
    entries = rng.uniform(0, 1, size=(6, 5))
    base = solve(CostMatrix.build(entries), 0.7)
    rp, cp = rng.permutation(6), rng.permutation(5)
    permuted = solve(CostMatrix.build(entries[rp][:, cp]), 0.7)
    assert len(permuted.matches) == len(base.matches)
    assert permuted.total_cost == pytest.approx(base.total_cost, abs=1e-9)


def test_row_permutation_permutes_pairs(rng):
    for _ in range(50):
        entries = rng.uniform(0, 1, size=(6, 5))
        entries[rng.random(size=(6, 5)) < 0.1] = INFEASIBLE
        base = solve(CostMatrix.build(entries), 0.7)
        rp = [int(r) for r in rng.permutation(6)]
        permuted = solve(CostMatrix(entries[rp], row_ids=rp, col_ids=list(range(5))), 0.7)
        assert sorted((r, c) for r, c, _ in permuted.matches) == sorted((r, c) for r, c, _ in base.matches)
        assert sorted(permuted.unmatched_rows) == sorted(base.unmatched_rows)


def test_deterministic(rng):
    cost = CostMatrix.build(rng.uniform(0, 1, size=(7, 7)))
    assert solve(cost, 0.5).matches == solve(cost, 0.5).matches
