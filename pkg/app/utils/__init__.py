# Utils package

from .assignment import AssignmentResult, solve
from .common import configure_logging, format_float, format_sig, quantize_sig
from .geometry import (
    cosine_distance,
    eg_cost_matrix,
    em_fused_cost_matrix,
    embedding_cost_matrix,
    embedding_iou_cost_matrix,
    giou_cost_matrix,
    giou_distance,
    iou,
    iou_cost_matrix,
)
from .kalman_filter import KalmanFilter, KalmanState, predicted_box, predicted_center

__all__ = [
    "AssignmentResult",
    "solve",
    "configure_logging",
    "format_float",
    "format_sig",
    "quantize_sig",
    "cosine_distance",
    "eg_cost_matrix",
    "em_fused_cost_matrix",
    "embedding_cost_matrix",
    "embedding_iou_cost_matrix",
    "giou_cost_matrix",
    "giou_distance",
    "iou",
    "iou_cost_matrix",
    "KalmanFilter",
    "KalmanState",
    "predicted_box",
    "predicted_center",
]
