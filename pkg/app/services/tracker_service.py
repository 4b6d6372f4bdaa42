"""Online multi-object tracker: SimpleTrack association plus the BYTE and JDE baselines."""

import logging
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import DegenerateStateError, DimensionMismatchError, SequencingError
from app.models.geometry import BoundingBox, CostMatrix
from app.models.records import ResultRecord
from app.models.tracking import Detection, EmbeddingGrid, FrameInput, Track, TrackState
from app.schemas.tracking import Similarity, Strategy, TrackerConfig
from app.utils.assignment import solve
from app.utils.geometry import (
    cosine_distance,
    eg_cost_matrix,
    em_fused_cost_matrix,
    embedding_cost_matrix,
    embedding_iou_cost_matrix,
    giou_cost_matrix,
    iou_cost_matrix,
)
from app.utils.kalman_filter import KalmanFilter, KalmanState, predicted_box, predicted_center

logger = logging.getLogger("app.tracker_service")

TrackOutput = Tuple[int, BoundingBox, float]
CostFn = Callable[[List[Track], List[Detection]], CostMatrix]


class Tracker:
    """
    Per-sequence tracker state. One instance per sequence; not safe for concurrent use.

    ``update`` dispatches to the strategy selected in the config. Every step returns
    ``(id, box, score)`` for the tracks that are Tracked in that frame, sorted by id.
    """

    def __init__(self, config: Optional[TrackerConfig] = None):
        self.config = config or TrackerConfig()
        self.kf = KalmanFilter(
            std_weight_position=self.config.kalman_std_weight_position,
            std_weight_velocity=self.config.kalman_std_weight_velocity,
        )
        self.tracks: List[Track] = []
        self.removed_ids: set = set()
        self.frame_id: Optional[int] = None
        self.dim: Optional[int] = None
        self._next_id = 1

    # ------------------------------------------------------------------ #
    def update(self, frame_input: FrameInput) -> List[TrackOutput]:
        if self.config.strategy == Strategy.BYTE:
            return self.step_byte(frame_input)
        if self.config.strategy == Strategy.JDE:
            return self.step_jde(frame_input)
        return self.step(frame_input)

    def step(self, frame_input: FrameInput) -> List[TrackOutput]:
        """SimpleTrack: two-stage association on the configured cost, then tracking retrieval."""
        cost_fn = self._similarity_cost(self.config.effective_similarity)
        retrieval = self.config.retrieval_enabled and frame_input.grid is not None
        return self._two_stage(frame_input, cost_fn, cost_fn, self.config.two_stage, retrieval, True)

    def step_byte(self, frame_input: FrameInput) -> List[TrackOutput]:
        """BYTE: IoU cost in both stages, no retrieval, embeddings ignored."""
        cost_fn = self._similarity_cost(Similarity.IOU)
        return self._two_stage(frame_input, cost_fn, cost_fn, True, False, False)

    def step_jde(self, frame_input: FrameInput) -> List[TrackOutput]:
        """JDE: embedding+motion cost over high-score detections, then IoU for recently tracked leftovers."""
        cfg = self.config
        frame = self._begin(frame_input)
        high, _ = self._split(frame_input.detections)
        tracks = self._predict_live_tracks()
        was_tracked = {t.id for t in tracks if t.state == TrackState.TRACKED}

        first = solve(self._embedding_motion_cost(tracks, high), cfg.jde_embedding_thresh)
        for ti, di, _ in first.matches:
            self._apply_match(tracks[ti], high[di], frame, update_embedding=True)
        remaining = [tracks[i] for i in first.unmatched_rows]
        leftover_dets = [high[j] for j in first.unmatched_cols]

        recent = [t for t in remaining if t.id in was_tracked]
        second = solve(self._similarity_cost(Similarity.IOU)(recent, leftover_dets), cfg.jde_iou_thresh)
        for ti, di, _ in second.matches:
            self._apply_match(recent[ti], leftover_dets[di], frame, update_embedding=False)
        matched_second = {recent[ti].id for ti, _, _ in second.matches}
        remaining = [t for t in remaining if t.id not in matched_second]
        unmatched_dets = [leftover_dets[j] for j in second.unmatched_cols]

        for t in remaining:
            self._mark_unmatched(t, frame)
        self._spawn(unmatched_dets, frame, use_embeddings=True)
        return self._finish(frame)

    def retrieve_lost(self, tracks: Sequence[Track], grid: EmbeddingGrid, frame: int) -> List[Track]:
        """
        Probe the embedding grid around each track's predicted centre.

        A track is recovered when the smallest cosine distance between its memorised
        embedding and the 3x3 cell neighbourhood is below ``eps_retrieval``. Recovered
        tracks are emitted at their predicted box without a measurement update.

        Returns:
            The tracks that were not recovered.
        """
        still_unmatched = []
        for track in tracks:
            if track.emb is None:
                still_unmatched.append(track)
                continue
            cx, cy = predicted_center(track.kf)
            best = self._min_neighborhood_distance(track, grid.neighborhood(cx, cy))
            if best is not None and best < self.config.eps_retrieval:
                track.mark_tracked(frame)
                track.output_box = predicted_box(track.kf)
                logger.debug("Frame %d: retrieved track %d (distance %.4f)", frame, track.id, best)
            else:
                still_unmatched.append(track)
        return still_unmatched

    # ------------------------------------------------------------------ #
    def _two_stage(
        self,
        frame_input: FrameInput,
        first_cost: CostFn,
        second_cost: CostFn,
        two_stage: bool,
        retrieval: bool,
        use_embeddings: bool,
    ) -> List[TrackOutput]:
        cfg = self.config
        frame = self._begin(frame_input)
        high, low = self._split(frame_input.detections)
        tracks = self._predict_live_tracks()

        first = solve(first_cost(tracks, high), cfg.match_thresh_high)
        for ti, di, _ in first.matches:
            self._apply_match(tracks[ti], high[di], frame, update_embedding=use_embeddings)
        remaining = [tracks[i] for i in first.unmatched_rows]

        if two_stage and low and remaining:
            second = solve(second_cost(remaining, low), cfg.match_thresh_low)
            for ti, di, _ in second.matches:
                self._apply_match(remaining[ti], low[di], frame, update_embedding=False)
            remaining = [remaining[i] for i in second.unmatched_rows]

        if retrieval and remaining:
            remaining = self.retrieve_lost(remaining, frame_input.grid, frame)

        for t in remaining:
            self._mark_unmatched(t, frame)
        self._spawn([high[j] for j in first.unmatched_cols], frame, use_embeddings)
        return self._finish(frame)

    def _begin(self, frame_input: FrameInput) -> int:
        frame = frame_input.frame
        if self.frame_id is not None and frame <= self.frame_id:
            raise SequencingError(f"frame {frame} does not follow frame {self.frame_id}")
        for det in frame_input.detections:
            if det.dim is None:
                continue
            if self.dim is None:
                self.dim = det.dim
            elif det.dim != self.dim:
                raise DimensionMismatchError(f"frame {frame}: embedding dim {det.dim}, sequence uses {self.dim}")
        grid = frame_input.grid
        if grid is not None and self.dim is not None and grid.dim != self.dim:
            raise DimensionMismatchError(f"frame {frame}: grid dim {grid.dim}, sequence uses {self.dim}")
        self.frame_id = frame
        logger.debug("Frame %d: %d detections, %d live tracks", frame, len(frame_input.detections), len(self.tracks))
        return frame

    def _split(self, detections: Sequence[Detection]) -> Tuple[List[Detection], List[Detection]]:
        high = [d for d in detections if d.score > self.config.tau_high]
        low = [d for d in detections if self.config.tau_low < d.score <= self.config.tau_high]
        return high, low

    def _predict_live_tracks(self) -> List[Track]:
        live = []
        for track in self.tracks:
            track.output_box = None
            mean = track.kf.mean
            if track.state != TrackState.TRACKED:
                mean = mean.copy()
                mean[7] = 0.0
                track.kf = KalmanState(mean, track.kf.covariance)
            track.kf = self.kf.predict(track.kf)
            try:
                predicted_box(track.kf)
            except DegenerateStateError as e:
                logger.warning("Removing track %d with degenerate state: %s", track.id, e)
                track.mark_removed()
                self.removed_ids.add(track.id)
                continue
            live.append(track)
        self.tracks = live
        return list(live)

    def _apply_match(self, track: Track, det: Detection, frame: int, update_embedding: bool) -> None:
        track.kf = self.kf.update(track.kf, det.box)
        track.score = det.score
        if update_embedding:
            track.update_embedding(det.embedding, self.config.ema_alpha)
        track.mark_tracked(frame)
        track.output_box = predicted_box(track.kf)

    def _mark_unmatched(self, track: Track, frame: int) -> None:
        track.mark_lost(frame)
        if track.lost_age > self.config.max_time_lost:
            track.mark_removed()
            self.removed_ids.add(track.id)
            logger.debug("Frame %d: removed track %d after %d lost frames", frame, track.id, track.lost_age)

    def _spawn(self, detections: Sequence[Detection], frame: int, use_embeddings: bool) -> None:
        for det in detections:
            if det.score <= self.config.eps_init:
                continue
            track = Track(
                id=self._next_id,
                kf=self.kf.initiate(det.box),
                emb=None,
                score=det.score,
                start_frame=frame,
                last_frame=frame,
            )
            if use_embeddings:
                track.update_embedding(det.embedding, self.config.ema_alpha)
            track.output_box = det.box
            self._next_id += 1
            self.tracks.append(track)
            logger.debug("Frame %d: new track %d", frame, track.id)

    def _finish(self, frame: int) -> List[TrackOutput]:
        self.tracks = [t for t in self.tracks if t.is_live]
        emitted = [
            (t.id, t.output_box, t.score)
            for t in sorted(self.tracks, key=lambda t: t.id)
            if t.state == TrackState.TRACKED and t.output_box is not None
        ]
        logger.debug("Frame %d: emitted %d boxes", frame, len(emitted))
        return emitted

    # ------------------------------------------------------------------ #
    @staticmethod
    def _pairs_for_tracks(tracks: Sequence[Track]):
        return [(predicted_box(t.kf), t.emb) for t in tracks]

    @staticmethod
    def _pairs_for_dets(dets: Sequence[Detection]):
        return [(d.box, d.embedding) for d in dets]

    def _similarity_cost(self, similarity: Similarity) -> CostFn:
        cfg = self.config

        def cost(tracks: List[Track], dets: List[Detection]) -> CostMatrix:
            if similarity == Similarity.EMBEDDING_MOTION:
                return self._embedding_motion_cost(tracks, dets)
            t_pairs, d_pairs = self._pairs_for_tracks(tracks), self._pairs_for_dets(dets)
            if similarity == Similarity.IOU:
                return iou_cost_matrix(t_pairs, d_pairs)
            if similarity == Similarity.GIOU:
                return giou_cost_matrix(t_pairs, d_pairs)
            if similarity == Similarity.EMBEDDING:
                return embedding_cost_matrix(t_pairs, d_pairs)
            if similarity == Similarity.EMBEDDING_IOU:
                return embedding_iou_cost_matrix(t_pairs, d_pairs, cfg.lambda1, cfg.lambda2)
            return eg_cost_matrix(t_pairs, d_pairs, cfg.lambda1, cfg.lambda2)

        return cost

    def _embedding_motion_cost(self, tracks: List[Track], dets: List[Detection]) -> CostMatrix:
        t_pairs, d_pairs = self._pairs_for_tracks(tracks), self._pairs_for_dets(dets)
        emb_cost = embedding_cost_matrix(t_pairs, d_pairs)
        boxes = [d.box for d in dets]
        gate = np.zeros(emb_cost.shape, dtype=np.float64)
        for i, track in enumerate(tracks):
            gate[i] = self.kf.gating_distance(track.kf, boxes)
        return em_fused_cost_matrix(emb_cost, gate, self.config.gate_threshold, self.config.em_weight)

    @staticmethod
    def _min_neighborhood_distance(track: Track, vectors: np.ndarray) -> Optional[float]:
        best = None
        norms = np.linalg.norm(vectors, axis=1)
        for vec, norm in zip(vectors, norms):
            # empty background cells carry no identity
            if not np.isfinite(norm) or norm == 0.0:
                continue
            d = cosine_distance(track.emb, vec)
            if best is None or d < best:
                best = d
        return best


class TrackerService:
    """Runs whole sequences through a fresh Tracker."""

    def track_sequence(self, frames: Iterable[FrameInput], config: Optional[TrackerConfig] = None) -> List[ResultRecord]:
        config = config or TrackerConfig()
        tracker = Tracker(config)
        records: List[ResultRecord] = []
        n_frames = 0
        for frame_input in frames:
            n_frames += 1
            for track_id, box, score in tracker.update(frame_input):
                records.append(ResultRecord.from_box(frame_input.frame, track_id, box, score))
        logger.info(
            "Tracked %d frames with strategy=%s: %d boxes, %d identities",
            n_frames,
            config.strategy.value,
            len(records),
            len({r.id for r in records}),
        )
        return records


_tracker_service_instance: Optional[TrackerService] = None


def get_tracker_service() -> TrackerService:
    global _tracker_service_instance
    if _tracker_service_instance is None:
        _tracker_service_instance = TrackerService()
    return _tracker_service_instance
