"""SVG overlays of ground-truth and result boxes for debugging evaluations."""

import logging
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.patches as mpatches  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402

from app.models.records import GroundTruth, ResultRecord, results_by_frame  # noqa: E402

logger = logging.getLogger("app.plot_service")

GT_COLOR = "tab:green"
RES_COLOR = "tab:red"


def _sample_frames(frames: Sequence[int], max_frames: int) -> List[int]:
    frames = sorted(frames)
    if len(frames) <= max_frames:
        return frames
    step = (len(frames) - 1) / (max_frames - 1) if max_frames > 1 else 0
    return sorted({frames[round(i * step)] for i in range(max_frames)})


def plot_overlay(
    gt: GroundTruth,
    res: Sequence[ResultRecord],
    path: str,
    frames: Optional[Sequence[int]] = None,
    max_frames: int = 6,
) -> List[int]:
    """Draw GT (solid) and result (dashed, labelled with ids) boxes for a sample of frames.

    Returns:
        The frames that were drawn.
    """
    gt_frames = gt.by_frame()
    res_frames = results_by_frame(list(res))
    chosen = list(frames) if frames is not None else _sample_frames(list(set(gt_frames) | set(res_frames)), max_frames)
    if not chosen:
        logger.warning("Nothing to plot for %s", path)
        return []

    with plt.rc_context({"svg.hashsalt": "mot-overlay", "font.size": 7}):
        fig, axes = plt.subplots(1, len(chosen), figsize=(3 * len(chosen), 3), squeeze=False)
        for ax, frame in zip(axes[0], chosen):
            xs, ys = [0.0], [0.0]
            for g in gt_frames.get(frame, []):
                ax.add_patch(mpatches.Rectangle((g.x, g.y), g.w, g.h, fill=False, edgecolor=GT_COLOR, linewidth=1.2))
                xs += [g.x, g.x + g.w]
                ys += [g.y, g.y + g.h]
            for r in res_frames.get(frame, []):
                ax.add_patch(
                    mpatches.Rectangle((r.x, r.y), r.w, r.h, fill=False, edgecolor=RES_COLOR, linestyle="--", linewidth=1.0)
                )
                ax.text(r.x, r.y, str(r.id), color=RES_COLOR, va="bottom")
                xs += [r.x, r.x + r.w]
                ys += [r.y, r.y + r.h]
            ax.set_xlim(min(xs) - 5, max(xs) + 5)
            # image coordinates: y grows downwards
            ax.set_ylim(max(ys) + 5, min(ys) - 5)
            ax.set_aspect("equal")
            ax.set_title(f"frame {frame}")
        fig.legend(
            handles=[
                mpatches.Patch(edgecolor=GT_COLOR, fill=False, label="ground truth"),
                mpatches.Patch(edgecolor=RES_COLOR, fill=False, linestyle="--", label="result"),
            ],
            loc="lower center",
            ncol=2,
        )
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info("Wrote overlay of %d frames to %s", len(chosen), path)
    return chosen
