"""CLEAR (MOTA, FP, FN, IDsw) and identity (IDF1, IDP, IDR) evaluation of tracker output."""

import logging
import math
import os
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.config import settings
from app.exceptions import EmptyGroundTruthError, InvariantViolation
from app.models.geometry import INFEASIBLE, CostMatrix
from app.models.records import GroundTruth, ResultRecord, results_by_frame
from app.schemas.metrics import MetricsReport
from app.utils.assignment import solve
from app.utils.geometry import iou_matrix

logger = logging.getLogger("app.metrics_service")

REPORT_COLUMNS = ("MOTA", "IDF1", "IDP", "IDR", "IDsw", "FP", "FN", "num_gt", "num_res")


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _build_report(
    name: Optional[str], fp: int, fn: int, idsw: int, num_gt: int, num_res: int, num_matches: int, idtp: int
) -> MetricsReport:
    if num_gt == 0:
        raise EmptyGroundTruthError("ground truth is empty; MOTA is undefined")
    return MetricsReport(
        name=name,
        mota=1.0 - (fp + fn + idsw) / num_gt,
        idf1=_ratio(2 * idtp, num_gt + num_res),
        idp=_ratio(idtp, num_res),
        idr=_ratio(idtp, num_gt),
        idsw=idsw,
        fp=fp,
        fn=fn,
        num_gt=num_gt,
        num_res=num_res,
        num_matches=num_matches,
        idtp=idtp,
        idfp=num_res - idtp,
        idfn=num_gt - idtp,
    )


class MetricsService:
    def evaluate(
        self,
        gt: GroundTruth,
        res: Sequence[ResultRecord],
        iou_match_threshold: Optional[float] = None,
        name: Optional[str] = None,
    ) -> MetricsReport:
        """
        Evaluate results against ground truth.

        Per frame, ground-truth and result boxes are matched by minimum (1 - IoU) with
        pairs below the IoU threshold excluded. A ground-truth identity keeps its
        previous result id whenever that pair is still within the gate. An identity
        switch is counted when a ground-truth identity is matched to a different result
        id than at its last match. IDF1 comes from one global trajectory matching.
        """
        thr = settings.EVAL_IOU_THRESHOLD if iou_match_threshold is None else iou_match_threshold
        if not 0.0 < thr < 1.0:
            raise ValueError(f"IoU threshold must be in (0, 1), got {thr}")
        if gt.num_objects == 0:
            raise EmptyGroundTruthError("ground truth is empty; MOTA is undefined")

        gt_frames = gt.by_frame()
        res_frames = results_by_frame(list(res))
        mapping: Dict[int, int] = {}
        fp = fn = idsw = num_matches = 0
        # frames where a (gt id, result id) pair overlaps enough to count for IDF1
        pair_hits: Dict[tuple, int] = defaultdict(int)

        for frame in sorted(set(gt_frames) | set(res_frames)):
            gts = gt_frames.get(frame, [])
            hyps = res_frames.get(frame, [])
            if gts and hyps:
                ious = iou_matrix([g.box for g in gts], [h.box for h in hyps])
            else:
                ious = np.zeros((len(gts), len(hyps)))
            within = ious >= thr
            for gi, hi in zip(*np.nonzero(within)):
                pair_hits[(gts[gi].id, hyps[hi].id)] += 1

            matched_g, matched_h = set(), set()
            hyp_index = {h.id: j for j, h in enumerate(hyps)}
            for gi, g in enumerate(gts):
                hj = hyp_index.get(mapping.get(g.id, None))
                if hj is not None and hj not in matched_h and within[gi, hj]:
                    matched_g.add(gi)
                    matched_h.add(hj)

            free_g = [i for i in range(len(gts)) if i not in matched_g]
            free_h = [j for j in range(len(hyps)) if j not in matched_h]
            if free_g and free_h:
                sub = 1.0 - ious[np.ix_(free_g, free_h)]
                sub[~within[np.ix_(free_g, free_h)]] = INFEASIBLE
                result = solve(CostMatrix(sub, free_g, free_h), math.inf)
                for gi, hj, _ in result.matches:
                    g_id, h_id = gts[gi].id, hyps[hj].id
                    if g_id in mapping and mapping[g_id] != h_id:
                        idsw += 1
                        logger.debug("Frame %d: identity switch for gt %d (%d -> %d)", frame, g_id, mapping[g_id], h_id)
                    mapping[g_id] = h_id
                    matched_g.add(gi)
                    matched_h.add(hj)

            num_matches += len(matched_g)
            fp += len(hyps) - len(matched_h)
            fn += len(gts) - len(matched_g)

        num_gt = gt.num_objects
        num_res = sum(len(v) for v in res_frames.values())
        idtp = self._identity_true_positives(gt, res_frames, pair_hits)
        report = _build_report(name, fp, fn, idsw, num_gt, num_res, num_matches, idtp)
        if fp + num_matches != num_res or fn + num_matches != num_gt:
            raise InvariantViolation("CLEAR counters do not add up")
        logger.info("Evaluated %s: MOTA=%.3f IDF1=%.3f IDsw=%d", name or "sequence", report.mota, report.idf1, idsw)
        return report

    @staticmethod
    def _identity_true_positives(gt: GroundTruth, res_frames, pair_hits: Dict[tuple, int]) -> int:
        gt_ids = gt.ids
        res_ids = sorted({r.id for rows in res_frames.values() for r in rows})
        if not gt_ids or not res_ids:
            return 0
        gt_index = {g: i for i, g in enumerate(gt_ids)}
        res_index = {h: j for j, h in enumerate(res_ids)}
        overlap = np.zeros((len(gt_ids), len(res_ids)), dtype=np.int64)
        for (g, h), count in pair_hits.items():
            overlap[gt_index[g], res_index[h]] = count
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        return int(overlap[rows, cols].sum())

    def aggregate(self, reports: Iterable[MetricsReport], name: str = "OVERALL") -> MetricsReport:
        """Sum counters across sequences, then recompute the ratios."""
        reports = list(reports)
        return _build_report(
            name,
            fp=sum(r.fp for r in reports),
            fn=sum(r.fn for r in reports),
            idsw=sum(r.idsw for r in reports),
            num_gt=sum(r.num_gt for r in reports),
            num_res=sum(r.num_res for r in reports),
            num_matches=sum(r.num_matches for r in reports),
            idtp=sum(r.idtp for r in reports),
        )


def format_report(reports: Sequence[MetricsReport]) -> str:
    """Aligned text table followed by a one-line summary of the last report."""
    if isinstance(reports, MetricsReport):
        reports = [reports]
    names = [r.name or "sequence" for r in reports]
    name_width = max(len(n) for n in names + ["name"])
    header = "name".ljust(name_width) + "".join(c.rjust(9) for c in REPORT_COLUMNS)
    lines = [header]
    for label, r in zip(names, reports):
        cells = [f"{r.mota:.3f}", f"{r.idf1:.3f}", f"{r.idp:.3f}", f"{r.idr:.3f}", str(r.idsw), str(r.fp), str(r.fn),
                 str(r.num_gt), str(r.num_res)]
        lines.append(label.ljust(name_width) + "".join(c.rjust(9) for c in cells))
    last = reports[-1]
    lines.append(f"MOTA={last.mota:.3f} IDF1={last.idf1:.3f} IDsw={last.idsw}")
    return "\n".join(lines) + "\n"


def write_report(path: str, report: MetricsReport) -> None:
    """Machine-readable KEY=value lines."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in report.model_dump().items():
            if value is None:
                continue
            text = f"{value:.6f}" if isinstance(value, float) else str(value)
            fh.write(f"{key.upper()}={text}\n")


_metrics_service_instance: Optional[MetricsService] = None


def get_metrics_service() -> MetricsService:
    global _metrics_service_instance
    if _metrics_service_instance is None:
        _metrics_service_instance = MetricsService()
    return _metrics_service_instance
