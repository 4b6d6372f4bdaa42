import io

import numpy as np
import pytest

from app.exceptions import EmbeddingFormatError, InputFormatError, ParseError
from app.models.geometry import BoundingBox
from app.models.records import ResultRecord
from app.models.tracking import Detection, EmbeddingGrid, FrameInput
from app.services.mot_io_service import (
    GridReader,
    attach_grids,
    iter_grids,
    linear_interpolation,
    read_detections,
    read_grid,
    read_ground_truth,
    read_results,
    write_detections,
    write_grids,
    write_results,
)


def _record(frame, track_id, x, y=0.0, w=10.0, h=10.0, score=1.0):
    return ResultRecord(frame=frame, id=track_id, x=x, y=y, w=w, h=h, score=score)


def test_results_round_trip(tmp_path, rng):
    records = []
    seen = set()
    while len(records) < 100:
        frame, track_id = int(rng.integers(1, 50)), int(rng.integers(1, 20))
        if (frame, track_id) in seen:
            continue
        seen.add((frame, track_id))
        x, y = (int(v) / 100 for v in rng.integers(-5000, 50000, size=2))
        w, h = (int(v) / 100 for v in rng.integers(1, 30000, size=2))
        records.append(ResultRecord(frame=frame, id=track_id, x=x, y=y, w=w, h=h,
                                    score=int(rng.integers(0, 10001)) / 10000))
    path = tmp_path / "res.txt"
    write_results(path, records)
    assert read_results(path) == sorted(records, key=lambda r: (r.frame, r.id))


def test_results_line_format():
    out = io.StringIO()
    write_results(out, [_record(2, 1, -0.001), _record(1, 3, 1.5, score=0.25)])
    assert out.getvalue().splitlines() == [
        "1,3,1.50,0.00,10.00,10.00,0.2500,-1,-1,-1",
        "2,1,0.00,0.00,10.00,10.00,1.0000,-1,-1,-1",
    ]


def test_results_parse_errors():
    with pytest.raises(ParseError) as exc:
        read_results(io.StringIO("1,1,0,0,10,10,1\n1,2,0,0,0,10,1\n"))
    assert exc.value.line_no == 2
    with pytest.raises(ParseError):
        read_results(io.StringIO("1,1,0,0\n"))


def test_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(InputFormatError):
        read_results(tmp_path / "nope.txt")


def test_detections_dimension_mismatch_reports_line():
    text = "#dim=4\n1,0,0,10,10,0.9,1,0,0,0\n1,20,0,10,10,0.8,1,0,0\n"
    with pytest.raises(EmbeddingFormatError) as exc:
        read_detections(io.StringIO(text))
    assert exc.value.line_no == 3
    assert ":3:" in str(exc.value)


@pytest.mark.parametrize("text", ["1,0,0,10,10,0.9\n", "#frames=3\n", "#dim=x\n"])
def test_detections_header_errors(text):
    with pytest.raises(ParseError):
        read_detections(io.StringIO(text))


def test_detections_score_out_of_range():
    with pytest.raises(ParseError):
        read_detections(io.StringIO("#dim=0\n1,0,0,10,10,1.5\n"))


def test_detections_frames_header_adds_empty_frames():
    frames = read_detections(io.StringIO("#dim=0,frames=3\n2,0,0,10,10,0.9\n"))
    assert [f.frame for f in frames] == [1, 2, 3]
    assert [len(f.detections) for f in frames] == [0, 1, 0]
    assert frames[1].detections[0].embedding is None


def test_detections_round_trip():
    frames = [
        FrameInput(frame=1, detections=[Detection(BoundingBox(1.5, 2, 10, 20), 0.75, np.array([0.5, -0.25]))]),
        FrameInput(frame=3, detections=[Detection(BoundingBox(4, 2, 10, 20), 0.5, np.array([1.0, 0.0]))]),
    ]
    out = io.StringIO()
    write_detections(out, frames, dim=2, num_frames=3)
    assert out.getvalue().startswith("#dim=2,frames=3\n")
    back = read_detections(io.StringIO(out.getvalue()))
    assert [f.frame for f in back] == [1, 2, 3]
    det = back[0].detections[0]
    assert det.box == BoundingBox(1.5, 2, 10, 20)
    assert det.score == 0.75
    assert det.embedding.tolist() == [0.5, -0.25]


def test_ground_truth_filters():
    text = (
        "1,1,0,0,10,10,1,1,1.0\n"
        "1,2,20,0,10,10,0,1,1.0\n"
        "1,3,40,0,10,10,1,2,1.0\n"
        "1,4,60,0,10,10,1,1,0.1\n"
    )
    assert [r.id for r in read_ground_truth(io.StringIO(text)).records] == [1, 3, 4]
    assert [r.id for r in read_ground_truth(io.StringIO(text), include_ignored=True).records] == [1, 2, 3, 4]
    assert [r.id for r in read_ground_truth(io.StringIO(text), classes={1}).records] == [1, 4]
    assert [r.id for r in read_ground_truth(io.StringIO(text), min_visibility=0.5).records] == [1, 3]


def test_grid_sidecar_round_trip(tmp_path, rng):
    grids = {
        1: EmbeddingGrid(rng.standard_normal((3, 4, 2)).astype(np.float32), stride=4),
        5: EmbeddingGrid(rng.standard_normal((2, 2, 2)).astype(np.float32), stride=8),
    }
    path = tmp_path / "grid.bin"
    write_grids(path, sorted(grids.items()))

    with GridReader(path) as reader:
        assert reader.frames == [1, 5]
        assert reader.get(2) is None
        again = reader.get(5)
        assert again.stride == 8
        assert np.array_equal(again.values, grids[5].values)
    assert np.array_equal(read_grid(path, 1).values, grids[1].values)
    assert [f for f, _ in iter_grids(path)] == [1, 5]
    with pytest.raises(InputFormatError):
        read_grid(path, 3)


def test_truncated_grid_sidecar(tmp_path):
    path = tmp_path / "grid.bin"
    write_grids(path, [(1, EmbeddingGrid(np.ones((2, 2, 2), dtype=np.float32)))])
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(InputFormatError):
        GridReader(path)


def test_attach_grids_adds_frames_without_detections(tmp_path):
    path = tmp_path / "grid.bin"
    grid = EmbeddingGrid(np.ones((2, 2, 2), dtype=np.float32))
    write_grids(path, [(1, grid), (2, grid)])
    with GridReader(path) as reader:
        frames = attach_grids([FrameInput(frame=1)], reader)
    assert [f.frame for f in frames] == [1, 2]
    assert all(f.grid is not None for f in frames)


# ----------------------------- interpolation ----------------------------- #
def test_interpolation_fills_midpoint():
    out = linear_interpolation([_record(1, 7, 0.0, score=0.8), _record(3, 7, 2.0, score=0.6)])
    assert [r.frame for r in out] == [1, 2, 3]
    assert out[1].box == BoundingBox(1.0, 0.0, 10.0, 10.0)
    assert out[1].score == pytest.approx(0.7)


def test_interpolation_respects_max_gap():
    records = [_record(1, 1, 0.0), _record(5, 1, 8.0)]
    assert linear_interpolation(records, max_gap=2) == records
    assert len(linear_interpolation(records, max_gap=3)) == 5
    with pytest.raises(ValueError):
        linear_interpolation(records, max_gap=0)


def test_interpolation_without_gaps_is_identity():
    records = [_record(f, i, float(f + i)) for f in range(1, 6) for i in (1, 2)]
    assert linear_interpolation(records) == records


def test_interpolation_is_idempotent_and_unique(rng):
    records = []
    for track_id in (1, 2, 3):
        frames = sorted(set(int(f) for f in rng.integers(1, 60, size=15)))
        records += [_record(f, track_id, float(f)) for f in frames]
    once = linear_interpolation(records, max_gap=5)
    assert linear_interpolation(once, max_gap=5) == once
    keys = [(r.frame, r.id) for r in once]
    assert len(keys) == len(set(keys))
    assert set((r.frame, r.id) for r in records) <= set(keys)
