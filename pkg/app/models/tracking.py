import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np

from app.config import settings
from app.exceptions import DimensionMismatchError, InvalidDetectionError
from app.models.geometry import BoundingBox
from app.utils.kalman_filter import KalmanState, predicted_box


class TrackState(str, Enum):
    TRACKED = "Tracked"
    LOST = "Lost"
    REMOVED = "Removed"


@dataclass
class Detection:
    box: BoundingBox
    score: float
    embedding: Optional[np.ndarray] = None

    def __post_init__(self):
        if not math.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise InvalidDetectionError(f"detection score {self.score!r} is outside [0, 1]")
        if self.embedding is not None:
            self.embedding = np.asarray(self.embedding, dtype=np.float64)

    @property
    def dim(self) -> Optional[int]:
        return None if self.embedding is None else int(self.embedding.shape[0])


@dataclass
class EmbeddingGrid:
    """Dense H x W x D embedding map; cell (row, col) covers stride x stride pixels."""

    values: np.ndarray
    stride: int = settings.GRID_STRIDE

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3:
            raise DimensionMismatchError(f"grid must be H x W x D, got shape {self.values.shape}")
        if self.stride < 1:
            raise DimensionMismatchError(f"grid stride must be at least 1, got {self.stride}")

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def dim(self) -> int:
        return int(self.values.shape[2])

    def cell_of(self, cx: float, cy: float):
        """Grid cell holding a pixel position, clipped to the nearest border cell."""
        col = min(max(math.floor(cx / self.stride), 0), self.width - 1)
        row = min(max(math.floor(cy / self.stride), 0), self.height - 1)
        return row, col

    def neighborhood(self, cx: float, cy: float) -> np.ndarray:
        """Vectors of the 3x3 cells around a pixel position, clipped to the grid (4 to 9 rows)."""
        row, col = self.cell_of(cx, cy)
        r0, r1 = max(row - 1, 0), min(row + 2, self.height)
        c0, c1 = max(col - 1, 0), min(col + 2, self.width)
        return self.values[r0:r1, c0:c1, :].reshape(-1, self.dim).astype(np.float64)


@dataclass
class FrameInput:
    frame: int
    detections: List[Detection] = field(default_factory=list)
    grid: Optional[EmbeddingGrid] = None


@dataclass
class Track:
    id: int
    kf: KalmanState
    emb: Optional[np.ndarray]
    score: float
    start_frame: int
    last_frame: int
    state: TrackState = TrackState.TRACKED
    lost_age: int = 0
    # box emitted for the current frame; None until the track is matched or retrieved
    output_box: Optional[BoundingBox] = None

    @property
    def is_live(self) -> bool:
        return self.state != TrackState.REMOVED

    def update_embedding(self, feat: Optional[np.ndarray], alpha: float) -> None:
        """Exponential moving average of L2-normalised features, renormalised."""
        if feat is None:
            return
        feat = np.asarray(feat, dtype=np.float64)
        norm = np.linalg.norm(feat)
        if not np.isfinite(norm) or norm == 0.0:
            return
        feat = feat / norm
        if self.emb is None:
            self.emb = feat
            return
        smooth = alpha * self.emb + (1.0 - alpha) * feat
        smooth_norm = np.linalg.norm(smooth)
        self.emb = smooth / smooth_norm if smooth_norm > 0 else feat

    def mark_tracked(self, frame: int) -> None:
        self.state = TrackState.TRACKED
        self.lost_age = 0
        self.last_frame = frame

    def mark_lost(self, frame: int) -> None:
        self.state = TrackState.LOST
        self.lost_age = frame - self.last_frame
        self.output_box = None

    def mark_removed(self) -> None:
        self.state = TrackState.REMOVED
        self.output_box = None

    @property
    def predicted_box(self) -> BoundingBox:
        return predicted_box(self.kf)

    def __repr__(self):
        return f"Track(id={self.id}, state={self.state.value}, frames={self.start_frame}-{self.last_frame})"
