import asyncio
import logging
from typing import List, Optional

from fastapi import APIRouter, File, Form, HTTPException, UploadFile

from app import __version__
from app.api.routes.common import binary_upload, text_upload, to_http_error
from app.models.records import ResultRecord
from app.schemas.synth import PresetInfo
from app.schemas.tracking import ResultRecordOut, RunManifest, Strategy, TrackerConfig, TrackResponse
from app.services.mot_io_service import GridReader, attach_grids, read_detections
from app.services.synth_service import list_presets
from app.services.tracker_service import get_tracker_service

logger = logging.getLogger("app.api.tracking")

router = APIRouter()


def _run_tracking(detections, grid, config: TrackerConfig) -> List[ResultRecord]:
    frames = read_detections(detections)
    if grid is not None:
        with GridReader(grid) as reader:
            frames = attach_grids(frames, reader)
    return get_tracker_service().track_sequence(frames, config)


@router.post("/track", response_model=TrackResponse)
async def track(
    detections: UploadFile = File(...),
    grid: Optional[UploadFile] = File(None),
    config: str = Form("{}"),
):
    """Track one sequence.

    Expected multipart/form-data keys:
      - detections (the "#dim=D" detections file)
      - grid (optional embedding-grid sidecar)
      - config (JSON string with TrackerConfig fields; omitted fields keep their defaults)
    """
    logger.info("[tracking] Tracking '%s' (grid=%s)", detections.filename, grid.filename if grid else None)
    warnings: List[str] = []
    try:
        tracker_config = TrackerConfig.model_validate_json(config or "{}")
        det_source = await text_upload(detections)
        grid_source = None
        if grid is not None and tracker_config.strategy != Strategy.SIMPLETRACK:
            warnings.append(f"strategy {tracker_config.strategy.value} does not use embedding grids; grid ignored")
            logger.warning("[tracking] %s", warnings[-1])
        elif grid is not None and tracker_config.retrieval_enabled:
            grid_source = await binary_upload(grid)

        # tracking is CPU bound; keep it off the event loop
        loop = asyncio.get_running_loop()
        records = await loop.run_in_executor(None, _run_tracking, det_source, grid_source, tracker_config)
    except HTTPException:
        raise
    except Exception as e:
        logger.exception("Error tracking '%s'", detections.filename)
        raise to_http_error(e, "track sequence")

    inputs = {"dets": detections.filename or "detections"}
    if grid is not None and not warnings:
        inputs["grid"] = grid.filename or "grid"
    manifest = RunManifest(command="track", version=__version__, config=tracker_config, inputs=inputs)
    return TrackResponse(
        records=[ResultRecordOut.model_validate(r) for r in records],
        manifest=manifest,
        warnings=warnings,
    )


@router.get("/presets", response_model=List[PresetInfo])
async def presets():
    """Synthetic scenario presets and their documented expected behaviour."""
    return list_presets()
