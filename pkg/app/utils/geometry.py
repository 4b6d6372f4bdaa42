"""Box overlap, appearance distance and the association cost matrices built from them.

Scalar functions are the reference definitions; the matrix builders compute the same
quantities with numpy broadcasting over all track/detection pairs.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from app.exceptions import DegenerateEmbeddingError, DimensionMismatchError
from app.models.geometry import INFEASIBLE, BoundingBox, CostMatrix, boxes_to_tlbr

logger = logging.getLogger("app.utils.geometry")

Embedding = np.ndarray
BoxEmbedding = Tuple[BoundingBox, Optional[Embedding]]

# 0.95 quantile of the chi-square distribution, indexed by degrees of freedom
CHI2INV95 = {
    1: 3.8415,
    2: 5.9915,
    3: 7.8147,
    4: 9.4877,
    5: 11.070,
    6: 12.592,
    7: 14.067,
    8: 15.507,
    9: 16.919,
}

DEFAULT_LAMBDA1 = 1.0
DEFAULT_LAMBDA2 = 0.5
DEFAULT_EM_WEIGHT = 0.98


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ax1, ay1, ax2, ay2 = a.tlbr
    bx1, by1, bx2, by2 = b.tlbr
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


def giou_distance(a: BoundingBox, b: BoundingBox) -> float:
    """1 - GIoU, in [0, 2); zero only for identical boxes."""
    ax1, ay1, ax2, ay2 = a.tlbr
    bx1, by1, bx2, by2 = b.tlbr
    iw = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    ih = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = iw * ih
    union = a.area + b.area - inter
    enclose = (max(ax2, bx2) - min(ax1, bx1)) * (max(ay2, by2) - min(ay1, by1))
    giou = inter / union - (enclose - union) / enclose
    return max(0.0, 1.0 - giou)


def _as_embedding(e) -> np.ndarray:
    if e is None:
        raise DegenerateEmbeddingError("embedding is missing")
    vec = np.asarray(e, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatchError(f"embedding must be a vector, got shape {vec.shape}")
    return vec


def cosine_distance(e1: Embedding, e2: Embedding) -> float:
    """1 - cosine similarity, in [0, 2]."""
    v1 = _as_embedding(e1)
    v2 = _as_embedding(e2)
    if v1.shape != v2.shape:
        raise DimensionMismatchError(f"embedding dimensions differ: {v1.shape[0]} vs {v2.shape[0]}")
    n1 = float(np.linalg.norm(v1))
    n2 = float(np.linalg.norm(v2))
    if not (np.isfinite(n1) and np.isfinite(n2)) or n1 == 0.0 or n2 == 0.0:
        raise DegenerateEmbeddingError("cosine distance needs finite, non-zero embeddings")
    similarity = float(np.dot(v1, v2)) / (n1 * n2)
    return min(2.0, max(0.0, 1.0 - similarity))


# ------------------------- matrix builders ------------------------- #
def _pair_overlaps(tracks_tlbr: np.ndarray, dets_tlbr: np.ndarray):
    """Broadcast intersection, union and enclosing area for every (track, detection) pair."""
    a = tracks_tlbr[:, None, :]
    b = dets_tlbr[None, :, :]
    iw = np.maximum(0.0, np.minimum(a[..., 2], b[..., 2]) - np.maximum(a[..., 0], b[..., 0]))
    ih = np.maximum(0.0, np.minimum(a[..., 3], b[..., 3]) - np.maximum(a[..., 1], b[..., 1]))
    inter = iw * ih
    area_a = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
    area_b = (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])
    union = area_a + area_b - inter
    enclose = (np.maximum(a[..., 2], b[..., 2]) - np.minimum(a[..., 0], b[..., 0])) * (
        np.maximum(a[..., 3], b[..., 3]) - np.minimum(a[..., 1], b[..., 1])
    )
    return inter, union, enclose


def iou_matrix(track_boxes: Sequence[BoundingBox], det_boxes: Sequence[BoundingBox]) -> np.ndarray:
    a, b = boxes_to_tlbr(track_boxes), boxes_to_tlbr(det_boxes)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)
    inter, union, _ = _pair_overlaps(a, b)
    return np.clip(inter / union, 0.0, 1.0)


def giou_distance_matrix(track_boxes: Sequence[BoundingBox], det_boxes: Sequence[BoundingBox]) -> np.ndarray:
    a, b = boxes_to_tlbr(track_boxes), boxes_to_tlbr(det_boxes)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)
    inter, union, enclose = _pair_overlaps(a, b)
    giou = inter / union - (enclose - union) / enclose
    return np.maximum(0.0, 1.0 - giou)


def _normalized_rows(embeddings: Sequence[Optional[Embedding]], side: str):
    """Return unit rows plus a validity mask; degenerate rows are zero and masked out."""
    dims = {np.asarray(e).shape for e in embeddings if e is not None}
    if len(dims) > 1:
        return None, None
    dim = dims.pop()[0] if dims else 0
    rows = np.zeros((len(embeddings), dim), dtype=np.float64)
    valid = np.zeros(len(embeddings), dtype=bool)
    for i, e in enumerate(embeddings):
        if e is None:
            logger.warning("Missing %s embedding at index %d; its costs are INFEASIBLE", side, i)
            continue
        vec = np.asarray(e, dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        if not np.isfinite(norm) or norm == 0.0:
            logger.warning("Degenerate %s embedding at index %d; its costs are INFEASIBLE", side, i)
            continue
        rows[i] = vec / norm
        valid[i] = True
    return rows, valid


def embedding_distance_matrix(
    track_embs: Sequence[Optional[Embedding]], det_embs: Sequence[Optional[Embedding]]
) -> np.ndarray:
    """Cosine distances for all pairs, INFEASIBLE where either embedding is unusable."""
    n, m = len(track_embs), len(det_embs)
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=np.float64)
    a, a_valid = _normalized_rows(track_embs, "track")
    b, b_valid = _normalized_rows(det_embs, "detection")
    if a is None or b is None or a.shape[1] != b.shape[1]:
        return _embedding_distance_loop(track_embs, det_embs)
    dist = np.clip(1.0 - a @ b.T, 0.0, 2.0)
    dist[~a_valid, :] = INFEASIBLE
    dist[:, ~b_valid] = INFEASIBLE
    return dist


def _embedding_distance_loop(track_embs, det_embs) -> np.ndarray:
    dist = np.full((len(track_embs), len(det_embs)), INFEASIBLE, dtype=np.float64)
    for i, e1 in enumerate(track_embs):
        for j, e2 in enumerate(det_embs):
            try:
                dist[i, j] = cosine_distance(e1, e2)
            except (DegenerateEmbeddingError, DimensionMismatchError) as e:
                logger.warning("Cost entry (%d, %d) is INFEASIBLE: %s", i, j, e)
    return dist


def _unzip(pairs: Sequence[BoxEmbedding]):
    boxes = [p[0] for p in pairs]
    embs = [p[1] for p in pairs]
    return boxes, embs


def _ids(ids, count: int):
    return list(ids) if ids is not None else list(range(count))


def iou_cost_matrix(tracks: Sequence[BoxEmbedding], dets: Sequence[BoxEmbedding], row_ids=None, col_ids=None) -> CostMatrix:
    t_boxes, _ = _unzip(tracks)
    d_boxes, _ = _unzip(dets)
    entries = 1.0 - iou_matrix(t_boxes, d_boxes)
    return CostMatrix(entries, _ids(row_ids, len(tracks)), _ids(col_ids, len(dets)))


def giou_cost_matrix(tracks: Sequence[BoxEmbedding], dets: Sequence[BoxEmbedding], row_ids=None, col_ids=None) -> CostMatrix:
    t_boxes, _ = _unzip(tracks)
    d_boxes, _ = _unzip(dets)
    entries = giou_distance_matrix(t_boxes, d_boxes)
    return CostMatrix(entries, _ids(row_ids, len(tracks)), _ids(col_ids, len(dets)))


def embedding_cost_matrix(tracks: Sequence[BoxEmbedding], dets: Sequence[BoxEmbedding], row_ids=None, col_ids=None) -> CostMatrix:
    _, t_embs = _unzip(tracks)
    _, d_embs = _unzip(dets)
    entries = embedding_distance_matrix(t_embs, d_embs)
    return CostMatrix(entries, _ids(row_ids, len(tracks)), _ids(col_ids, len(dets)))


def _fuse(appearance: Optional[np.ndarray], location: Optional[np.ndarray], lambda1: float, lambda2: float, shape):
    entries = np.zeros(shape, dtype=np.float64)
    # a zero weight drops its term, so INFEASIBLE appearance cannot leak through 0 * inf
    if lambda1 != 0.0:
        entries = lambda1 * appearance
    if lambda2 != 0.0:
        entries = entries + lambda2 * location
    return entries


def eg_cost_matrix(
    tracks: Sequence[BoxEmbedding],
    dets: Sequence[BoxEmbedding],
    lambda1: float = DEFAULT_LAMBDA1,
    lambda2: float = DEFAULT_LAMBDA2,
    row_ids=None,
    col_ids=None,
) -> CostMatrix:
    """Embedding-and-GIoU cost: lambda1 * cosine distance + lambda2 * GIoU distance."""
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError(f"cost weights must be non-negative, got {lambda1}, {lambda2}")
    t_boxes, t_embs = _unzip(tracks)
    d_boxes, d_embs = _unzip(dets)
    shape = (len(tracks), len(dets))
    appearance = embedding_distance_matrix(t_embs, d_embs) if lambda1 != 0.0 else None
    location = giou_distance_matrix(t_boxes, d_boxes) if lambda2 != 0.0 else None
    entries = _fuse(appearance, location, lambda1, lambda2, shape)
    return CostMatrix(entries, _ids(row_ids, len(tracks)), _ids(col_ids, len(dets)))


def embedding_iou_cost_matrix(
    tracks: Sequence[BoxEmbedding],
    dets: Sequence[BoxEmbedding],
    lambda1: float = DEFAULT_LAMBDA1,
    lambda2: float = DEFAULT_LAMBDA2,
    row_ids=None,
    col_ids=None,
) -> CostMatrix:
    """lambda1 * cosine distance + lambda2 * (1 - IoU)."""
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError(f"cost weights must be non-negative, got {lambda1}, {lambda2}")
    t_boxes, t_embs = _unzip(tracks)
    d_boxes, d_embs = _unzip(dets)
    shape = (len(tracks), len(dets))
    appearance = embedding_distance_matrix(t_embs, d_embs) if lambda1 != 0.0 else None
    location = 1.0 - iou_matrix(t_boxes, d_boxes) if lambda2 != 0.0 else None
    entries = _fuse(appearance, location, lambda1, lambda2, shape)
    return CostMatrix(entries, _ids(row_ids, len(tracks)), _ids(col_ids, len(dets)))


def em_fused_cost_matrix(
    emb_cost: CostMatrix,
    motion_gate: np.ndarray,
    gate_threshold: float = CHI2INV95[4],
    weight: float = DEFAULT_EM_WEIGHT,
) -> CostMatrix:
    """Embedding-and-motion baseline: appearance cost blended with the gated Mahalanobis distance.

    Args:
        emb_cost: Appearance cost matrix.
        motion_gate: Squared Mahalanobis distances with the same shape as ``emb_cost``.
        gate_threshold: Pairs whose distance exceeds this value become INFEASIBLE.
        weight: Share of the appearance term; the motion term is normalised by the gate.
    """
    gate = np.asarray(motion_gate, dtype=np.float64)
    if gate.shape != emb_cost.shape:
        raise DimensionMismatchError(f"motion gate shape {gate.shape} does not match cost shape {emb_cost.shape}")
    if gate_threshold <= 0:
        raise ValueError("gate_threshold must be positive")
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must be in [0, 1]")
    normalized = gate / gate_threshold
    entries = weight * emb_cost.entries + (1.0 - weight) * normalized
    entries[gate > gate_threshold] = INFEASIBLE
    return CostMatrix(entries, list(emb_cost.row_ids), list(emb_cost.col_ids))
