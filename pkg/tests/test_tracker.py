import numpy as np
import pytest

from app.exceptions import DimensionMismatchError, SequencingError
from app.models.geometry import BoundingBox
from app.models.tracking import Detection, EmbeddingGrid, FrameInput, Track, TrackState
from app.schemas.tracking import Similarity, Strategy, TrackerConfig
from app.services.metrics_service import MetricsService
from app.services.tracker_service import Tracker, TrackerService
from tests.conftest import linear_sequence, unit

E1 = unit([1.0, 0.0, 0.0, 0.0])
E2 = unit([0.0, 1.0, 0.0, 0.0])


def _frame(frame, *dets, grid=None):
    return FrameInput(frame=frame, detections=list(dets), grid=grid)


def _det(x, y, score=0.9, emb=E1, w=40.0, h=80.0):
    return Detection(BoundingBox(x, y, w, h), score, None if emb is None else emb.copy())


def _uniform_grid(vector, height=40, width=80, stride=4):
    values = np.tile(np.asarray(vector, dtype=np.float32), (height, width, 1))
    return EmbeddingGrid(values, stride=stride)


def test_linear_target_keeps_one_identity():
    records = TrackerService().track_sequence(linear_sequence())
    assert len(records) == 20
    assert {r.id for r in records} == {1}
    assert [r.frame for r in records] == list(range(1, 21))


@pytest.mark.parametrize("similarity", list(Similarity))
def test_every_similarity_tracks_a_linear_target(similarity):
    records = TrackerService().track_sequence(linear_sequence(), TrackerConfig(similarity=similarity))
    assert {r.id for r in records} == {1}
    assert len(records) == 20


def test_empty_frame_marks_tracks_lost():
    tracker = Tracker()
    assert [tid for tid, _, _ in tracker.update(_frame(1, _det(10, 10)))] == [1]
    assert tracker.update(_frame(2)) == []
    assert [t.state for t in tracker.tracks] == [TrackState.LOST]
    assert tracker.tracks[0].lost_age == 1


def test_frames_must_increase():
    tracker = Tracker()
    tracker.update(_frame(2, _det(10, 10)))
    with pytest.raises(SequencingError):
        tracker.update(_frame(2, _det(10, 10)))
    with pytest.raises(SequencingError):
        tracker.update(_frame(1))


def test_embedding_dimension_is_fixed_per_sequence():
    tracker = Tracker()
    tracker.update(_frame(1, _det(10, 10)))
    with pytest.raises(DimensionMismatchError):
        tracker.update(_frame(2, _det(10, 10, emb=unit([1.0, 0.0, 0.0]))))


def test_grid_dimension_must_match_embeddings():
    tracker = Tracker()
    tracker.update(_frame(1, _det(10, 10)))
    with pytest.raises(DimensionMismatchError):
        tracker.update(_frame(2, grid=_uniform_grid([1.0, 0.0, 0.0])))


def test_new_tracks_need_init_score():
    tracker = Tracker(TrackerConfig(eps_init=0.95))
    assert tracker.update(_frame(1, _det(10, 10, score=0.9))) == []
    assert tracker.tracks == []


def test_low_score_detection_continues_but_never_starts_a_track():
    tracker = Tracker()
    assert tracker.update(_frame(1, _det(10, 10, score=0.25))) == []

    tracker = Tracker()
    tracker.update(_frame(1, _det(10, 10)))
    out = tracker.update(_frame(2, _det(13, 10, score=0.25)))
    assert [tid for tid, _, _ in out] == [1]
    assert out[0][2] == 0.25


def test_single_stage_drops_low_score_continuation():
    tracker = Tracker(TrackerConfig(two_stage=False))
    tracker.update(_frame(1, _det(10, 10)))
    assert tracker.update(_frame(2, _det(13, 10, score=0.25))) == []


def test_high_tau_high_yields_no_output():
    config = TrackerConfig(tau_high=0.99)
    assert TrackerService().track_sequence(linear_sequence(), config) == []


def test_tracks_are_removed_after_max_time_lost():
    tracker = Tracker(TrackerConfig(max_time_lost=3))
    tracker.update(_frame(1, _det(10, 10)))
    for frame in (2, 3, 4):
        tracker.update(_frame(frame))
    assert len(tracker.tracks) == 1
    tracker.update(_frame(5))
    assert tracker.tracks == []
    assert tracker.removed_ids == {1}


def test_removed_id_is_never_emitted_again():
    tracker = Tracker(TrackerConfig(max_time_lost=2))
    assert [tid for tid, _, _ in tracker.update(_frame(1, _det(10, 10)))] == [1]
    for frame in (2, 3, 4):
        tracker.update(_frame(frame))
    assert tracker.removed_ids == {1}

    emitted = set()
    for frame in range(5, 12):
        out = tracker.update(_frame(frame, _det(10, 10), grid=_uniform_grid(E1)))
        emitted.update(tid for tid, _, _ in out)
    assert emitted == {2}


def test_lost_track_is_recovered_by_a_matching_detection():
    tracker = Tracker()
    tracker.update(_frame(1, _det(100, 40)))
    tracker.update(_frame(2))
    out = tracker.update(_frame(3, _det(101, 40)))
    assert [tid for tid, _, _ in out] == [1]
    assert tracker.tracks[0].state == TrackState.TRACKED


# ---------------------------- retrieval ---------------------------- #
def test_retrieval_recovers_track_from_its_own_embedding():
    tracker = Tracker()
    tracker.update(_frame(1, _det(40, 40)))
    out = tracker.update(_frame(2, grid=_uniform_grid(E1)))
    assert len(out) == 1
    tid, box, _ = out[0]
    assert tid == 1
    assert box == tracker.tracks[0].predicted_box
    assert tracker.tracks[0].state == TrackState.TRACKED


def test_retrieval_rejects_orthogonal_neighbourhood():
    tracker = Tracker()
    tracker.update(_frame(1, _det(40, 40)))
    assert tracker.update(_frame(2, grid=_uniform_grid(E2))) == []
    assert tracker.tracks[0].state == TrackState.LOST


def test_retrieval_disabled_ignores_grid():
    tracker = Tracker(TrackerConfig(retrieval_enabled=False))
    tracker.update(_frame(1, _det(40, 40)))
    assert tracker.update(_frame(2, grid=_uniform_grid(E1))) == []


def test_retrieve_lost_at_grid_corner():
    tracker = Tracker()
    grid = _uniform_grid(E2, height=5, width=5)
    values = grid.values.copy()
    values[0, 0] = E1
    corner = EmbeddingGrid(values, stride=4)
    assert corner.neighborhood(0.0, 0.0).shape == (4, 4)
    assert corner.neighborhood(1e6, 1e6).shape == (4, 4)
    assert corner.neighborhood(8.0, 8.0).shape == (9, 4)

    track = Track(id=1, kf=tracker.kf.initiate(BoundingBox(-5, -5, 10, 10)), emb=E1.copy(), score=0.9,
                  start_frame=1, last_frame=1)
    assert tracker.retrieve_lost([track], corner, frame=2) == []
    assert track.output_box == BoundingBox(-5, -5, 10, 10)

    far = Track(id=2, kf=tracker.kf.initiate(BoundingBox(10, 10, 4, 4)), emb=E1.copy(), score=0.9,
                start_frame=1, last_frame=1)
    assert tracker.retrieve_lost([far], corner, frame=2) == [far]


def test_retrieval_ignores_empty_cells():
    tracker = Tracker()
    tracker.update(_frame(1, _det(40, 40)))
    assert tracker.update(_frame(2, grid=_uniform_grid(np.zeros(4)))) == []


def test_embedding_memory_is_an_ema():
    track = Track(id=1, kf=None, emb=unit([1.0, 0.0]), score=0.9, start_frame=1, last_frame=1)
    track.update_embedding(np.array([0.0, 5.0]), alpha=0.9)
    np.testing.assert_allclose(track.emb, unit([0.9, 0.1]))
    assert np.linalg.norm(track.emb) == pytest.approx(1.0)


# ---------------------------- baselines ---------------------------- #
def test_strategies_agree_on_single_target():
    frames = linear_sequence()
    simple = TrackerService().track_sequence(frames, TrackerConfig())
    byte = TrackerService().track_sequence(frames, TrackerConfig(strategy=Strategy.BYTE))
    jde = TrackerService().track_sequence(frames, TrackerConfig(strategy=Strategy.JDE))
    assert simple == byte
    assert simple == jde


def test_byte_ignores_embeddings(crossing_scenario, rng):
    frames = crossing_scenario.without_grids()
    shuffled = [
        FrameInput(frame=f.frame, detections=[
            Detection(d.box, d.score, rng.standard_normal(d.dim)) for d in f.detections
        ])
        for f in frames
    ]
    config = TrackerConfig(strategy=Strategy.BYTE)
    assert TrackerService().track_sequence(frames, config) == TrackerService().track_sequence(shuffled, config)


def test_jde_single_target():
    records = TrackerService().track_sequence(linear_sequence(), TrackerConfig(strategy=Strategy.JDE))
    assert {r.id for r in records} == {1}
    assert len(records) == 20


def test_jde_motion_gate_dominates_appearance():
    tracker = Tracker(TrackerConfig(strategy=Strategy.JDE))
    tracker.update(_frame(1, _det(40, 40)))
    out = tracker.update(_frame(2, _det(240, 40)))
    assert [tid for tid, _, _ in out] == [2]
    assert tracker.tracks[0].state == TrackState.LOST


# ----------------------------- scenarios ---------------------------- #
def _evaluate(scenario, frames, config):
    records = TrackerService().track_sequence(frames, config)
    return MetricsService().evaluate(scenario.gt, records)


def test_crossing_embedding_association_keeps_identities(crossing_scenario):
    report = _evaluate(crossing_scenario, crossing_scenario.frames, TrackerConfig())
    assert report.idsw == 0
    assert report.idf1 == pytest.approx(1.0)


def test_crossing_iou_association_swaps_identities(crossing_scenario):
    report = _evaluate(crossing_scenario, crossing_scenario.frames, TrackerConfig(strategy=Strategy.BYTE))
    assert report.idsw >= 1
    assert report.idf1 < 1.0


def test_retrieval_bridges_missed_detections(occlusion_scenario):
    records = TrackerService().track_sequence(occlusion_scenario.frames, TrackerConfig(retrieval_enabled=True))
    walker = {r.frame for r in records if r.id == 2}
    assert set(range(24, 28)) <= walker

    report = MetricsService().evaluate(occlusion_scenario.gt, records)
    assert report.idsw == 0
    assert report.fn == 0

    without = _evaluate(occlusion_scenario, occlusion_scenario.frames, TrackerConfig(retrieval_enabled=False))
    assert without.fn > report.fn
