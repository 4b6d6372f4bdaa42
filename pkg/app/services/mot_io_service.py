"""Readers and writers for MOTChallenge-style text files and the embedding-grid sidecar."""

import io
import logging
import os
from collections import defaultdict
from contextlib import contextmanager
from typing import IO, Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from app.config import settings
from app.exceptions import (
    EmbeddingFormatError,
    InputFormatError,
    InvalidDetectionError,
    ParseError,
)
from app.models.geometry import BoundingBox
from app.models.records import GroundTruth, GroundTruthRecord, ResultRecord
from app.models.tracking import Detection, EmbeddingGrid, FrameInput
from app.utils.common import format_float, format_sig

logger = logging.getLogger("app.mot_io_service")

PathOrStream = Union[str, os.PathLike, IO]

GRID_HEADER = np.dtype("<u4")
GRID_HEADER_FIELDS = 5
GRID_VALUE = np.dtype("<f4")


def _source_name(src: PathOrStream) -> str:
    if isinstance(src, (str, os.PathLike)):
        return os.fspath(src)
    return getattr(src, "name", "<stream>")


@contextmanager
def _open(src: PathOrStream, mode: str):
    if isinstance(src, (str, os.PathLike)):
        try:
            fh = open(src, mode, encoding=None if "b" in mode else "utf-8", newline=None if "b" in mode else "")
        except FileNotFoundError as e:
            raise InputFormatError(f"file not found: {e.filename}", source=os.fspath(src)) from e
        with fh:
            yield fh
    else:
        if "b" not in mode and isinstance(src, (io.BufferedIOBase, io.RawIOBase)):
            yield io.TextIOWrapper(src, encoding="utf-8")
        else:
            yield src


def _data_lines(fh) -> Iterator[Tuple[int, str]]:
    for line_no, raw in enumerate(fh, start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield line_no, line


def _parse_box(fields: Sequence[str], source: str, line_no: int) -> BoundingBox:
    try:
        return BoundingBox(*(float(v) for v in fields))
    except ValueError as e:
        # InvalidBoxError is a ValueError too
        raise ParseError(f"invalid box {','.join(fields)}: {e}", source=source, line_no=line_no) from e


# ------------------------------- results ------------------------------- #
def write_results(
    dst: PathOrStream,
    records: Iterable[ResultRecord],
    decimals: Optional[int] = None,
    score_decimals: Optional[int] = None,
) -> None:
    """Write "frame,id,x,y,w,h,score,-1,-1,-1" lines sorted by frame then id."""
    decimals = settings.RESULT_DECIMALS if decimals is None else decimals
    score_decimals = settings.SCORE_DECIMALS if score_decimals is None else score_decimals
    ordered = sorted(records, key=lambda r: (r.frame, r.id))
    with _open(dst, "w") as fh:
        for r in ordered:
            box = ",".join(format_float(v, decimals) for v in (r.x, r.y, r.w, r.h))
            fh.write(f"{r.frame},{r.id},{box},{format_float(r.score, score_decimals)},-1,-1,-1\n")
    logger.debug("Wrote %d result rows to %s", len(ordered), _source_name(dst))


def read_results(src: PathOrStream) -> List[ResultRecord]:
    source = _source_name(src)
    records: List[ResultRecord] = []
    with _open(src, "r") as fh:
        for line_no, line in _data_lines(fh):
            fields = line.split(",")
            if len(fields) < 6:
                raise ParseError(f"expected at least 6 fields, got {len(fields)}", source=source, line_no=line_no)
            try:
                frame, track_id = int(float(fields[0])), int(float(fields[1]))
                score = float(fields[6]) if len(fields) > 6 else 1.0
            except ValueError as e:
                raise ParseError(str(e), source=source, line_no=line_no) from e
            box = _parse_box(fields[2:6], source, line_no)
            if frame < 1:
                raise ParseError(f"frame index {frame} must be >= 1", source=source, line_no=line_no)
            records.append(ResultRecord.from_box(frame, track_id, box, score))
    return records


# ------------------------------ detections ------------------------------ #
def _parse_header(line: str, source: str) -> Tuple[int, Optional[int]]:
    body = line.lstrip("#").strip()
    values: Dict[str, str] = {}
    for part in body.split(","):
        if "=" not in part:
            raise ParseError(f"malformed header field {part!r}", source=source, line_no=1)
        key, value = part.split("=", 1)
        values[key.strip()] = value.strip()
    try:
        dim = int(values["dim"])
        frames = int(values["frames"]) if "frames" in values else None
    except (KeyError, ValueError) as e:
        raise ParseError(f"header must be '#dim=D[,frames=N]', got {line!r}", source=source, line_no=1) from e
    if dim < 0 or (frames is not None and frames < 0):
        raise ParseError(f"negative value in header {line!r}", source=source, line_no=1)
    return dim, frames


def read_detections(src: PathOrStream) -> List[FrameInput]:
    """
    Parse a detections file into per-frame inputs in ascending frame order.

    The first line is the header "#dim=D" or "#dim=D,frames=N"; every other line is
    "frame,x,y,w,h,score,e1,...,eD". With frames=N, frames 1..N without detections are
    returned as empty inputs.
    """
    source = _source_name(src)
    by_frame: Dict[int, List[Detection]] = defaultdict(list)
    with _open(src, "r") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ParseError("missing '#dim=D' header", source=source, line_no=1)
        dim, num_frames = _parse_header(header, source)
        for line_no, line in _data_lines(fh):
            line_no += 1
            fields = line.split(",")
            if len(fields) < 6:
                raise ParseError(f"expected at least 6 fields, got {len(fields)}", source=source, line_no=line_no)
            if len(fields) - 6 != dim:
                raise EmbeddingFormatError(
                    f"embedding has {len(fields) - 6} values, header declares dim={dim}",
                    source=source,
                    line_no=line_no,
                )
            try:
                frame = int(fields[0])
                score = float(fields[5])
                embedding = np.array([float(v) for v in fields[6:]], dtype=np.float64) if dim else None
            except ValueError as e:
                raise ParseError(str(e), source=source, line_no=line_no) from e
            box = _parse_box(fields[1:5], source, line_no)
            try:
                by_frame[frame].append(Detection(box, score, embedding))
            except InvalidDetectionError as e:
                raise ParseError(str(e), source=source, line_no=line_no) from e

    frame_ids = set(by_frame)
    if num_frames is not None:
        frame_ids |= set(range(1, num_frames + 1))
    frames = [FrameInput(frame=f, detections=by_frame.get(f, [])) for f in sorted(frame_ids)]
    logger.info("Read %d detections over %d frames (dim=%d) from %s",
                sum(len(v) for v in by_frame.values()), len(frames), dim, source)
    return frames


def write_detections(
    dst: PathOrStream,
    frames: Iterable[FrameInput],
    dim: int,
    num_frames: Optional[int] = None,
    digits: Optional[int] = None,
) -> None:
    digits = settings.DETECTION_SIG_DIGITS if digits is None else digits
    with _open(dst, "w") as fh:
        fh.write(f"#dim={dim}" + (f",frames={num_frames}" if num_frames is not None else "") + "\n")
        for frame_input in sorted(frames, key=lambda f: f.frame):
            for det in frame_input.detections:
                values = [det.box.x, det.box.y, det.box.w, det.box.h, det.score]
                if dim:
                    if det.embedding is None or det.embedding.shape[0] != dim:
                        raise EmbeddingFormatError(f"frame {frame_input.frame}: embedding does not have dim={dim}")
                    values.extend(det.embedding.tolist())
                fh.write(f"{frame_input.frame}," + ",".join(format_sig(v, digits) for v in values) + "\n")


# ----------------------------- ground truth ----------------------------- #
def read_ground_truth(
    src: PathOrStream,
    include_ignored: bool = False,
    classes: Optional[Set[int]] = None,
    min_visibility: Optional[float] = None,
) -> GroundTruth:
    """
    Read "frame,id,x,y,w,h,conf,class,visibility" rows.

    Rows with conf 0 are dropped unless ``include_ignored``; ``classes`` keeps only the
    listed class ids; rows with visibility strictly below ``min_visibility`` are dropped.
    """
    source = _source_name(src)
    min_visibility = settings.EVAL_MIN_VISIBILITY if min_visibility is None else min_visibility
    records: List[GroundTruthRecord] = []
    dropped = 0
    with _open(src, "r") as fh:
        for line_no, line in _data_lines(fh):
            fields = line.split(",")
            if len(fields) < 6:
                raise ParseError(f"expected at least 6 fields, got {len(fields)}", source=source, line_no=line_no)
            try:
                frame, gt_id = int(float(fields[0])), int(float(fields[1]))
                consider = int(float(fields[6])) if len(fields) > 6 else 1
                cls = int(float(fields[7])) if len(fields) > 7 else 1
                visibility = float(fields[8]) if len(fields) > 8 else 1.0
            except ValueError as e:
                raise ParseError(str(e), source=source, line_no=line_no) from e
            box = _parse_box(fields[2:6], source, line_no)
            if (consider == 0 and not include_ignored) or (classes is not None and cls not in classes):
                dropped += 1
                continue
            if visibility < min_visibility:
                dropped += 1
                continue
            records.append(
                GroundTruthRecord(
                    frame=frame, id=gt_id, x=box.x, y=box.y, w=box.w, h=box.h,
                    consider=consider, cls=cls, visibility=min(1.0, max(0.0, visibility)),
                )
            )
    if dropped:
        logger.info("Dropped %d ground-truth rows from %s by consider/class/visibility filters", dropped, source)
    return GroundTruth(records=records)


def write_ground_truth(dst: PathOrStream, gt: GroundTruth, digits: Optional[int] = None) -> None:
    digits = settings.DETECTION_SIG_DIGITS if digits is None else digits
    with _open(dst, "w") as fh:
        for r in sorted(gt.records, key=lambda r: (r.frame, r.id)):
            box = ",".join(format_sig(v, digits) for v in (r.x, r.y, r.w, r.h))
            fh.write(f"{r.frame},{r.id},{box},{r.consider},{r.cls},{format_sig(r.visibility, digits)}\n")


# ---------------------------- embedding grids ---------------------------- #
def write_grids(dst: PathOrStream, grids: Iterable[Tuple[int, EmbeddingGrid]]) -> None:
    """Append one [frame, H, W, D, stride] u32 header plus H*W*D float32 values per frame."""
    with _open(dst, "wb") as fh:
        for frame, grid in grids:
            header = np.array([frame, grid.height, grid.width, grid.dim, grid.stride], dtype=GRID_HEADER)
            fh.write(header.tobytes())
            fh.write(np.ascontiguousarray(grid.values, dtype=GRID_VALUE).tobytes())


class GridReader:
    """Random access to an embedding-grid sidecar; frame offsets are indexed once on open."""

    def __init__(self, src: PathOrStream):
        self.source = _source_name(src)
        if isinstance(src, (str, os.PathLike)):
            try:
                self._fh = open(src, "rb")
            except FileNotFoundError as e:
                raise InputFormatError(f"file not found: {e.filename}", source=self.source) from e
            self._owned = True
        else:
            self._fh = src
            self._owned = False
        self._index: Dict[int, Tuple[int, int, int, int, int]] = {}
        self._build_index()

    def _build_index(self) -> None:
        header_size = GRID_HEADER.itemsize * GRID_HEADER_FIELDS
        self._fh.seek(0, os.SEEK_END)
        end = self._fh.tell()
        offset = 0
        while offset < end:
            self._fh.seek(offset)
            raw = self._fh.read(header_size)
            if len(raw) != header_size:
                raise InputFormatError(f"truncated grid header at byte {offset}", source=self.source)
            frame, h, w, d, stride = (int(v) for v in np.frombuffer(raw, dtype=GRID_HEADER))
            payload = h * w * d * GRID_VALUE.itemsize
            if offset + header_size + payload > end:
                raise InputFormatError(f"truncated grid payload for frame {frame}", source=self.source)
            if frame in self._index:
                raise InputFormatError(f"duplicate grid for frame {frame}", source=self.source)
            self._index[frame] = (offset + header_size, h, w, d, stride)
            offset += header_size + payload
        logger.debug("Indexed %d grids in %s", len(self._index), self.source)

    @property
    def frames(self) -> List[int]:
        return sorted(self._index)

    def get(self, frame: int) -> Optional[EmbeddingGrid]:
        entry = self._index.get(frame)
        if entry is None:
            return None
        offset, h, w, d, stride = entry
        self._fh.seek(offset)
        values = np.frombuffer(self._fh.read(h * w * d * GRID_VALUE.itemsize), dtype=GRID_VALUE)
        return EmbeddingGrid(values.reshape(h, w, d).copy(), stride=stride)

    def close(self) -> None:
        if self._owned:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_grid(src: PathOrStream, frame: int) -> EmbeddingGrid:
    with GridReader(src) as reader:
        grid = reader.get(frame)
    if grid is None:
        raise InputFormatError(f"no grid for frame {frame}", source=_source_name(src))
    return grid


def iter_grids(src: PathOrStream) -> Iterator[Tuple[int, EmbeddingGrid]]:
    with GridReader(src) as reader:
        for frame in reader.frames:
            yield frame, reader.get(frame)


def attach_grids(frames: List[FrameInput], reader: GridReader) -> List[FrameInput]:
    """Pair frames with their grids, adding empty frames for grids that have no detections."""
    by_frame = {f.frame: f for f in frames}
    for frame in reader.frames:
        if frame not in by_frame:
            by_frame[frame] = FrameInput(frame=frame)
    for frame, frame_input in by_frame.items():
        frame_input.grid = reader.get(frame)
    return [by_frame[f] for f in sorted(by_frame)]


# ----------------------------- interpolation ----------------------------- #
def linear_interpolation(records: Iterable[ResultRecord], max_gap: Optional[int] = None) -> List[ResultRecord]:
    """
    Fill per-identity gaps of 1..max_gap frames with linearly interpolated boxes.

    Interpolated rows take the mean of the two endpoint scores. Original records are
    returned unchanged; the output is sorted by (frame, id).
    """
    max_gap = settings.INTERP_MAX_GAP if max_gap is None else max_gap
    if max_gap < 1:
        raise ValueError(f"max_gap must be at least 1, got {max_gap}")
    records = list(records)
    by_id: Dict[int, List[ResultRecord]] = defaultdict(list)
    for r in records:
        by_id[r.id].append(r)

    filled: List[ResultRecord] = []
    for track_id, rows in by_id.items():
        rows = sorted(rows, key=lambda r: r.frame)
        for a, b in zip(rows, rows[1:]):
            gap = b.frame - a.frame - 1
            if gap < 1 or gap > max_gap:
                continue
            span = b.frame - a.frame
            start = np.array([a.x, a.y, a.w, a.h])
            stop = np.array([b.x, b.y, b.w, b.h])
            score = (a.score + b.score) / 2
            for frame in range(a.frame + 1, b.frame):
                x, y, w, h = (start + (stop - start) * ((frame - a.frame) / span)).tolist()
                filled.append(ResultRecord(frame=frame, id=track_id, x=x, y=y, w=w, h=h, score=score))
    if filled:
        logger.info("Interpolated %d boxes (max_gap=%d)", len(filled), max_gap)
    return sorted(records + filled, key=lambda r: (r.frame, r.id))
