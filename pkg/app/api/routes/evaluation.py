import asyncio
import logging
from typing import List

from fastapi import APIRouter, File, Form, HTTPException, UploadFile

from app.api.routes.common import text_upload, to_http_error
from app.config import settings
from app.models.records import ResultRecord
from app.schemas.metrics import MetricsReport
from app.schemas.tracking import ResultRecordOut
from app.services.metrics_service import get_metrics_service
from app.services.mot_io_service import linear_interpolation, read_ground_truth, read_results

logger = logging.getLogger("app.api.evaluation")

router = APIRouter()


def _run_evaluation(gt, res, name, iou_thresh: float, min_visibility: float) -> MetricsReport:
    ground_truth = read_ground_truth(gt, min_visibility=min_visibility)
    return get_metrics_service().evaluate(ground_truth, read_results(res), iou_thresh, name=name)


def _run_interpolation(res, max_gap: int) -> List[ResultRecord]:
    return linear_interpolation(read_results(res), max_gap)


@router.post("/evaluate", response_model=MetricsReport)
async def evaluate(
    gt: UploadFile = File(...),
    res: UploadFile = File(...),
    iou_thresh: float = Form(settings.EVAL_IOU_THRESHOLD),
    min_visibility: float = Form(settings.EVAL_MIN_VISIBILITY),
):
    """Evaluate a results file against a ground-truth file (CLEAR and identity metrics)."""
    logger.info("[evaluation] Evaluating '%s' against '%s'", res.filename, gt.filename)
    try:
        gt_source, res_source = await text_upload(gt), await text_upload(res)
        loop = asyncio.get_running_loop()
        return await loop.run_in_executor(
            None, _run_evaluation, gt_source, res_source, res.filename, iou_thresh, min_visibility
        )
    except HTTPException:
        raise
    except Exception as e:
        logger.exception("Error evaluating '%s'", res.filename)
        raise to_http_error(e, "evaluate results")


@router.post("/interpolate", response_model=List[ResultRecordOut])
async def interpolate(
    res: UploadFile = File(...),
    max_gap: int = Form(settings.INTERP_MAX_GAP),
):
    """Fill per-identity gaps of up to ``max_gap`` frames with linearly interpolated boxes."""
    logger.info("[evaluation] Interpolating '%s' (max_gap=%d)", res.filename, max_gap)
    try:
        res_source = await text_upload(res)
        loop = asyncio.get_running_loop()
        records = await loop.run_in_executor(None, _run_interpolation, res_source, max_gap)
    except HTTPException:
        raise
    except Exception as e:
        logger.exception("Error interpolating '%s'", res.filename)
        raise to_http_error(e, "interpolate results")
    return [ResultRecordOut.model_validate(r) for r in records]
