import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.models.geometry import CostMatrix

logger = logging.getLogger("app.utils.assignment")

Match = Tuple[Hashable, Hashable, float]


@dataclass
class AssignmentResult:
    matches: List[Match] = field(default_factory=list)
    unmatched_rows: List[Hashable] = field(default_factory=list)
    unmatched_cols: List[Hashable] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return math.fsum(c for _, _, c in self.matches)


def solve(cost: CostMatrix, threshold: float) -> AssignmentResult:
    """
    Minimum-cost bipartite matching with pre-gating.

    Entries above ``threshold`` or INFEASIBLE are excluded before solving. Among the
    remaining pairs the solver picks the largest matching and, among those, the one
    with the smallest total cost. Forbidden pairs are replaced by a cost larger than
    the sum of every feasible entry, so the Hungarian solver never prefers one over a
    feasible alternative; any forbidden pair it is forced to pick is dropped.

    Args:
        cost: Track-by-detection cost matrix.
        threshold: Largest admissible cost, non-negative.

    Returns:
        Matches in ascending row order plus the unmatched row and column ids.
    """
    if threshold < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold}")
    rows, cols = cost.shape
    if rows == 0 or cols == 0:
        return AssignmentResult([], list(cost.row_ids), list(cost.col_ids))

    entries = cost.entries
    allowed = np.isfinite(entries) & (entries <= threshold)
    if not allowed.any():
        return AssignmentResult([], list(cost.row_ids), list(cost.col_ids))

    big = float(entries[allowed].sum()) + 1.0
    padded = np.where(allowed, entries, big)
    row_idx, col_idx = linear_sum_assignment(padded)

    matches: List[Match] = []
    matched_rows, matched_cols = set(), set()
    for r, c in sorted(zip(row_idx.tolist(), col_idx.tolist())):
        if not allowed[r, c]:
            continue
        matches.append((cost.row_ids[r], cost.col_ids[c], float(entries[r, c])))
        matched_rows.add(r)
        matched_cols.add(c)

    unmatched_rows = [cost.row_ids[r] for r in range(rows) if r not in matched_rows]
    unmatched_cols = [cost.col_ids[c] for c in range(cols) if c not in matched_cols]
    logger.debug("Assignment %dx%d: %d matches at threshold %.3f", rows, cols, len(matches), threshold)
    return AssignmentResult(matches, unmatched_rows, unmatched_cols)
