"""Timing harness for association cost-matrix construction."""

import logging
import time
from typing import Callable, List, Optional

import numpy as np

from app.config import settings
from app.models.geometry import BoundingBox
from app.schemas.bench import BenchReport
from app.utils.geometry import (
    CHI2INV95,
    eg_cost_matrix,
    em_fused_cost_matrix,
    embedding_cost_matrix,
    iou_cost_matrix,
)
from app.utils.kalman_filter import KalmanFilter

logger = logging.getLogger("app.bench_service")


def _random_boxes(rng: np.random.Generator, n: int) -> List[BoundingBox]:
    xy = rng.uniform(0.0, 1000.0, size=(n, 2))
    wh = rng.uniform(20.0, 120.0, size=(n, 2))
    return [BoundingBox(float(x), float(y), float(w), float(h)) for (x, y), (w, h) in zip(xy, wh)]


def _random_embeddings(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    vectors = rng.standard_normal((n, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _median_ns(fn: Callable[[], object], iterations: int, warmup: int) -> int:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iterations):
        start = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - start)
    return int(np.median(samples))


class BenchService:
    def bench_costs(
        self,
        num_tracks: int = 50,
        num_dets: int = 50,
        emb_dim: Optional[int] = None,
        iterations: Optional[int] = None,
        seed: int = 0,
        warmup: Optional[int] = None,
    ) -> BenchReport:
        """
        Median wall time of building the EG, EM and IoU cost matrices on identical inputs.

        The EM timing includes what that cost needs per frame: the appearance matrix,
        one Mahalanobis gating pass per track and the fusion.
        """
        emb_dim = settings.EMB_DIM if emb_dim is None else emb_dim
        if min(num_tracks, num_dets, emb_dim) < 1:
            raise ValueError("bench sizes must be at least 1")
        iterations = settings.BENCH_ITERATIONS if iterations is None else iterations
        warmup = settings.BENCH_WARMUP if warmup is None else warmup
        if iterations < 1:
            raise ValueError("iterations must be at least 1")

        rng = np.random.default_rng(seed)
        kf = KalmanFilter()
        track_boxes = _random_boxes(rng, num_tracks)
        det_boxes = _random_boxes(rng, num_dets)
        track_embs = _random_embeddings(rng, num_tracks, emb_dim)
        det_embs = _random_embeddings(rng, num_dets, emb_dim)
        states = [kf.predict(kf.initiate(b)) for b in track_boxes]
        tracks = list(zip(track_boxes, track_embs))
        dets = list(zip(det_boxes, det_embs))

        def build_eg():
            return eg_cost_matrix(tracks, dets)

        def build_em():
            emb_cost = embedding_cost_matrix(tracks, dets)
            gate = np.stack([kf.gating_distance(s, det_boxes) for s in states])
            return em_fused_cost_matrix(emb_cost, gate, CHI2INV95[4])

        def build_iou():
            return iou_cost_matrix(tracks, dets)

        report = BenchReport(
            num_tracks=num_tracks,
            num_dets=num_dets,
            emb_dim=emb_dim,
            iterations=iterations,
            warmup=warmup,
            seed=seed,
            eg_ns=_median_ns(build_eg, iterations, warmup),
            em_ns=_median_ns(build_em, iterations, warmup),
            iou_ns=_median_ns(build_iou, iterations, warmup),
        )
        logger.info(
            "Bench %dx%d dim=%d: EG %d ns, EM %d ns, IoU %d ns",
            num_tracks, num_dets, emb_dim, report.eg_ns, report.em_ns, report.iou_ns,
        )
        return report


def format_bench(report: BenchReport) -> str:
    rows = [("EG", report.eg_ns), ("EM", report.em_ns), ("IoU", report.iou_ns)]
    lines = [f"{report.num_tracks} tracks x {report.num_dets} dets, dim {report.emb_dim}, "
             f"median of {report.iterations}"]
    lines.append(f"{'cost':<6}{'median_ns':>14}{'us':>12}")
    for label, ns in rows:
        lines.append(f"{label:<6}{ns:>14d}{ns / 1000:>12.1f}")
    lines.append(f"EG/EM = {report.eg_over_em:.3f}")
    return "\n".join(lines) + "\n"


_bench_service_instance: Optional[BenchService] = None


def get_bench_service() -> BenchService:
    global _bench_service_instance
    if _bench_service_instance is None:
        _bench_service_instance = BenchService()
    return _bench_service_instance
