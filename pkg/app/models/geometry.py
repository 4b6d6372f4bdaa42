import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from app.exceptions import DimensionMismatchError, InvalidBoxError, InvariantViolation

INFEASIBLE = math.inf


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel rectangle stored as top-left corner plus width/height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidBoxError(f"box coordinate {name}={value!r} is not finite")
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(f"box must have positive size, got w={self.w!r} h={self.h!r}")

    @property
    def tlbr(self) -> Tuple[float, float, float, float]:
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    @property
    def tlwh(self) -> Tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.tlbr
        return (x2 - x1) * (y2 - y1)

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2, self.y + self.h / 2)

    def to_xyah(self) -> np.ndarray:
        """Center x, center y, aspect ratio (w/h), height."""
        cx, cy = self.center
        return np.array([cx, cy, self.w / self.h, self.h], dtype=np.float64)

    @classmethod
    def from_xyah(cls, cx: float, cy: float, a: float, h: float) -> "BoundingBox":
        w = a * h
        return cls(cx - w / 2, cy - h / 2, w, h)

    def translated(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def scaled(self, factor: float) -> "BoundingBox":
        return BoundingBox(self.x * factor, self.y * factor, self.w * factor, self.h * factor)


def boxes_to_tlbr(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (N, 4) array of corners."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.tlbr for b in boxes], dtype=np.float64)


@dataclass
class CostMatrix:
    """Rows are existing tracks, columns are detections; INFEASIBLE marks forbidden pairs."""

    entries: np.ndarray
    row_ids: List[int] = field(default_factory=list)
    col_ids: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2:
            self.entries = self.entries.reshape(len(self.row_ids), len(self.col_ids))
        rows, cols = self.entries.shape
        if rows != len(self.row_ids) or cols != len(self.col_ids):
            raise DimensionMismatchError(
                f"cost matrix shape {self.entries.shape} does not match "
                f"{len(self.row_ids)} row ids and {len(self.col_ids)} col ids"
            )
        # nan is never a cost
        self.entries[np.isnan(self.entries)] = INFEASIBLE
        feasible = self.entries[np.isfinite(self.entries)]
        if feasible.size and feasible.min() < 0:
            raise InvariantViolation(f"negative cost {feasible.min()!r} in cost matrix")

    @classmethod
    def build(cls, entries: np.ndarray, row_ids=None, col_ids=None) -> "CostMatrix":
        entries = np.asarray(entries, dtype=np.float64)
        rows, cols = entries.shape
        return cls(
            entries,
            list(row_ids) if row_ids is not None else list(range(rows)),
            list(col_ids) if col_ids is not None else list(range(cols)),
        )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    @property
    def feasible_mask(self) -> np.ndarray:
        return np.isfinite(self.entries)

    def rows_as_text(self, decimals: int = 6) -> List[str]:
        """One comma-separated line per row; INFEASIBLE is written as "inf"."""
        lines = []
        for row in self.entries:
            lines.append(",".join("inf" if not math.isfinite(v) else f"{v:.{decimals}f}" for v in row))
        return lines
