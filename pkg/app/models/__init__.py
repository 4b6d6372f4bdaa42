from .geometry import INFEASIBLE, BoundingBox, CostMatrix
from .records import GroundTruth, GroundTruthRecord, ResultRecord
from .tracking import Detection, EmbeddingGrid, FrameInput, Track, TrackState

__all__ = [
    "INFEASIBLE",
    "BoundingBox",
    "CostMatrix",
    "GroundTruth",
    "GroundTruthRecord",
    "ResultRecord",
    "Detection",
    "EmbeddingGrid",
    "FrameInput",
    "Track",
    "TrackState",
]
