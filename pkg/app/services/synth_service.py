"""Deterministic synthetic tracking scenarios: ground truth, noisy detections and embedding grids."""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from app.config import settings
from app.exceptions import ScenarioError
from app.models.geometry import BoundingBox
from app.models.records import GroundTruth, GroundTruthRecord
from app.models.tracking import Detection, EmbeddingGrid, FrameInput
from app.schemas.synth import OcclusionWindow, PresetInfo, ScenarioSpec, TargetSpec
from app.services.mot_io_service import write_detections, write_grids, write_ground_truth
from app.utils.common import quantize_sig

logger = logging.getLogger("app.synth_service")

SCENARIO_FILES = ("gt.txt", "det.txt", "grid.bin", "scenario.json")


@dataclass
class Scenario:
    spec: ScenarioSpec
    gt: GroundTruth
    frames: List[FrameInput] = field(default_factory=list)
    signatures: Optional[np.ndarray] = None

    def without_grids(self) -> List[FrameInput]:
        return [FrameInput(frame=f.frame, detections=f.detections) for f in self.frames]


def _check_spec(spec: ScenarioSpec) -> None:
    n = spec.num_frames
    for i, t in enumerate(spec.targets):
        if not t.spawn <= t.despawn <= n:
            raise ScenarioError(f"target {i}: frames {t.spawn}..{t.despawn} outside 1..{n}")
        if min(t.size) <= 0:
            raise ScenarioError(f"target {i}: box size must be positive, got {t.size}")
        frames = [w[0] for w in t.waypoints]
        if frames != sorted(frames) or len(set(frames)) != len(frames):
            raise ScenarioError(f"target {i}: waypoint frames must be strictly increasing")
    for w in spec.occlusion_windows:
        if w.target >= len(spec.targets):
            raise ScenarioError(f"occlusion window refers to unknown target {w.target}")
        if not 1 <= w.start <= w.end <= n:
            raise ScenarioError(f"occlusion window {w.start}..{w.end} outside 1..{n}")
    for lo, hi in (spec.score_model.tracked, spec.score_model.occluded):
        if not 0.0 <= lo <= hi <= 1.0:
            raise ScenarioError(f"score range ({lo}, {hi}) is not inside [0, 1]")
    if spec.emb_dim < len(spec.targets):
        raise ScenarioError(f"emb_dim={spec.emb_dim} cannot hold {len(spec.targets)} orthogonal signatures")


def _center_at(target: TargetSpec, frame: int):
    frames = [w[0] for w in target.waypoints]
    cx = float(np.interp(frame, frames, [w[1] for w in target.waypoints]))
    cy = float(np.interp(frame, frames, [w[2] for w in target.waypoints]))
    return cx, cy


def _occlusion(spec: ScenarioSpec, target: int, frame: int) -> Optional[OcclusionWindow]:
    for w in spec.occlusion_windows:
        if w.target == target and w.start <= frame <= w.end:
            return w
    return None


def _unit(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return vectors / np.where(norms > 0, norms, 1.0)


class SynthService:
    def generate(self, spec: ScenarioSpec) -> Scenario:
        """
        Build ground truth, detections and embedding grids for a scenario.

        Each target gets a fixed identity signature from a random orthonormal set.
        Detection embeddings and grid cells are the signature plus noise whose expected
        norm is ``emb_noise_std``. A grid cell belongs to the target whose box contains
        the cell centre and whose box centre is nearest; occluded targets are painted
        too. Everything is drawn from one generator seeded by ``spec.seed``.
        """
        _check_spec(spec)
        rng = np.random.default_rng(spec.seed)
        digits = settings.DETECTION_SIG_DIGITS
        dim = spec.emb_dim
        per_component = spec.emb_noise_std / math.sqrt(dim)

        q, _ = np.linalg.qr(rng.standard_normal((dim, max(len(spec.targets), 1))))
        signatures = q.T[: len(spec.targets)]

        grid_h = math.ceil(spec.height / spec.stride)
        grid_w = math.ceil(spec.width / spec.stride)
        cell_x = (np.arange(grid_w) + 0.5) * spec.stride
        cell_y = (np.arange(grid_h) + 0.5) * spec.stride
        cxx, cyy = np.meshgrid(cell_x, cell_y)

        gt_records: List[GroundTruthRecord] = []
        frames: List[FrameInput] = []
        for frame in range(1, spec.num_frames + 1):
            detections: List[Detection] = []
            boxes = []
            for i, target in enumerate(spec.targets):
                if not target.spawn <= frame <= target.despawn:
                    continue
                cx, cy = _center_at(target, frame)
                w, h = target.size
                occluded = _occlusion(spec, i, frame)
                gx, gy, gw, gh = (quantize_sig(v, digits) for v in (cx - w / 2, cy - h / 2, w, h))
                gt_records.append(
                    GroundTruthRecord(frame=frame, id=i + 1, x=gx, y=gy, w=gw, h=gh,
                                      visibility=0.0 if occluded else 1.0)
                )
                boxes.append((i, cx, cy, w, h))

                # draws happen for every live target so the stream does not depend on occlusions
                noise_c = rng.normal(0.0, spec.det_noise_std, size=2)
                noise_s = rng.normal(0.0, spec.size_noise_std, size=2)
                noise_e = rng.normal(0.0, per_component, size=dim)
                u = rng.random()
                if occluded is not None and occluded.mode == "drop":
                    continue
                lo, hi = spec.score_model.occluded if occluded is not None else spec.score_model.tracked
                dw, dh = w * math.exp(noise_s[0]), h * math.exp(noise_s[1])
                dcx, dcy = cx + noise_c[0], cy + noise_c[1]
                box = BoundingBox(*(quantize_sig(v, digits) for v in (dcx - dw / 2, dcy - dh / 2, dw, dh)))
                emb = _unit(signatures[i] + noise_e)
                detections.append(
                    Detection(
                        box=box,
                        score=quantize_sig(lo + (hi - lo) * u, digits),
                        embedding=np.array([quantize_sig(v, digits) for v in emb]),
                    )
                )

            grid = self._paint_grid(rng, spec, signatures, boxes, cxx, cyy, per_component)
            frames.append(FrameInput(frame=frame, detections=detections, grid=grid))

        logger.info(
            "Generated scenario %s: %d frames, %d targets, %d detections (seed=%d)",
            spec.name, spec.num_frames, len(spec.targets), sum(len(f.detections) for f in frames), spec.seed,
        )
        return Scenario(spec=spec, gt=GroundTruth(records=gt_records), frames=frames, signatures=signatures)

    @staticmethod
    def _paint_grid(rng, spec: ScenarioSpec, signatures, boxes, cxx, cyy, per_component) -> EmbeddingGrid:
        dim = spec.emb_dim
        values = _unit(rng.standard_normal(cxx.shape + (dim,)))
        best = np.full(cxx.shape, np.inf)
        owner = np.full(cxx.shape, -1)
        for i, cx, cy, w, h in boxes:
            inside = (cxx >= cx - w / 2) & (cxx < cx + w / 2) & (cyy >= cy - h / 2) & (cyy < cy + h / 2)
            dist = (cxx - cx) ** 2 + (cyy - cy) ** 2
            closer = inside & (dist < best)
            best[closer] = dist[closer]
            owner[closer] = i
        noise = rng.normal(0.0, per_component, size=cxx.shape + (dim,))
        for i, *_ in boxes:
            mask = owner == i
            values[mask] = _unit(signatures[i] + noise[mask])
        return EmbeddingGrid(values.astype(np.float32), stride=spec.stride)

    def write_scenario(self, directory: str, scenario: Scenario) -> Dict[str, str]:
        """Write gt.txt, det.txt, grid.bin and scenario.json; returns the written paths."""
        os.makedirs(directory, exist_ok=True)
        paths = {name.split(".")[0]: os.path.join(directory, name) for name in SCENARIO_FILES}
        write_ground_truth(paths["gt"], scenario.gt)
        write_detections(paths["det"], scenario.frames, scenario.spec.emb_dim, num_frames=scenario.spec.num_frames)
        write_grids(paths["grid"], ((f.frame, f.grid) for f in scenario.frames if f.grid is not None))
        with open(paths["scenario"], "w", encoding="utf-8") as fh:
            json.dump(scenario.spec.model_dump(mode="json"), fh, indent=2, sort_keys=True)
            fh.write("\n")
        logger.info("Wrote scenario %s to %s", scenario.spec.name, directory)
        return paths


# ------------------------------- presets ------------------------------- #
def crossing_spec(seed: int = 7) -> ScenarioSpec:
    """
    Two targets on straight paths cross head-on at frame 6 (x=140), moving 16 px per frame.

    A is detected only at low confidence for frames 4-8. Its track is three frames old
    when that window opens, so the velocity estimate still lags the target.
    """
    return ScenarioSpec(
        name="crossing",
        num_frames=12,
        width=320,
        height=160,
        targets=[
            TargetSpec(spawn=1, despawn=12, waypoints=[(1, 60.0, 80.0), (12, 236.0, 80.0)], size=(40.0, 80.0)),
            TargetSpec(spawn=1, despawn=12, waypoints=[(1, 220.0, 80.0), (12, 44.0, 80.0)], size=(40.0, 80.0)),
        ],
        occlusion_windows=[OcclusionWindow(target=0, start=4, end=8, mode="low")],
        emb_dim=16,
        emb_noise_std=0.05,
        seed=seed,
        expected=(
            "SimpleTrack: IDsw=0, IDF1=1.0. BYTE (IoU only) misses A's low-score boxes, its coasting "
            "track takes B's detection and A respawns under a new id: IDsw>=1, IDF1<1."
        ),
    )


def occlusion_reappear_spec(seed: int = 0) -> ScenarioSpec:
    """A walker passes 30 px below a standing target and is undetected for frames 24-27."""
    return ScenarioSpec(
        name="occlusion-reappear",
        num_frames=40,
        width=320,
        height=160,
        targets=[
            TargetSpec(spawn=1, despawn=40, waypoints=[(1, 160.0, 60.0)], size=(40.0, 80.0)),
            TargetSpec(spawn=1, despawn=40, waypoints=[(1, 60.0, 90.0), (40, 216.0, 90.0)], size=(40.0, 80.0)),
        ],
        occlusion_windows=[OcclusionWindow(target=1, start=24, end=27, mode="drop")],
        emb_dim=16,
        emb_noise_std=0.05,
        seed=seed,
        expected="SimpleTrack with retrieval keeps the walker's identity through the gap (IDsw=0). "
                 "Without the grid the gap shows up as missed boxes that interpolation recovers.",
    )


def crowd_parallel_spec(seed: int = 0) -> ScenarioSpec:
    """Eight 24x48 targets 20 px apart moving down together."""
    targets = [
        TargetSpec(spawn=1, despawn=30, waypoints=[(1, 60.0 + 20.0 * i, 40.0), (30, 60.0 + 20.0 * i, 156.0)],
                   size=(24.0, 48.0))
        for i in range(8)
    ]
    return ScenarioSpec(
        name="crowd-parallel",
        num_frames=30,
        width=320,
        height=240,
        targets=targets,
        det_noise_std=1.0,
        size_noise_std=0.02,
        emb_dim=16,
        emb_noise_std=0.1,
        seed=seed,
        expected="Overlapping neighbours; embedding association keeps all 8 identities (IDsw=0).",
    )


PRESETS: Dict[str, Callable[[int], ScenarioSpec]] = {
    "crossing": crossing_spec,
    "occlusion-reappear": occlusion_reappear_spec,
    "crowd-parallel": crowd_parallel_spec,
}


def preset_spec(name: str, seed: Optional[int] = None) -> ScenarioSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return factory() if seed is None else factory(seed)


def list_presets() -> List[PresetInfo]:
    infos = []
    for name, factory in PRESETS.items():
        spec = factory()
        infos.append(PresetInfo(name=name, num_frames=spec.num_frames, num_targets=len(spec.targets),
                                expected=spec.expected or ""))
    return infos


_synth_service_instance: Optional[SynthService] = None


def get_synth_service() -> SynthService:
    global _synth_service_instance
    if _synth_service_instance is None:
        _synth_service_instance = SynthService()
    return _synth_service_instance
