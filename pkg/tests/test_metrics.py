from itertools import permutations

import pytest

from app.exceptions import EmptyGroundTruthError
from app.models.records import GroundTruth, GroundTruthRecord, ResultRecord
from app.services.metrics_service import MetricsService, format_report, write_report
from app.services.plot_service import plot_overlay
from app.utils.geometry import iou


def _gt(rows):
    return GroundTruth(records=[GroundTruthRecord(frame=f, id=i, x=x, y=y, w=w, h=h) for f, i, x, y, w, h in rows])


def _res(rows):
    return [ResultRecord(frame=f, id=i, x=x, y=y, w=w, h=h) for f, i, x, y, w, h in rows]


def _two_walkers(frames=10):
    return [(f, 1, float(f), 0.0, 10.0, 10.0) for f in range(1, frames + 1)] + \
           [(f, 2, float(f), 100.0, 10.0, 10.0) for f in range(1, frames + 1)]


def _brute_force_idf1(gt, res, thr=0.5):
    gt_ids, res_ids = gt.ids, sorted({r.id for r in res})
    hits = {}
    for g in gt.records:
        for r in res:
            if r.frame == g.frame and iou(g.box, r.box) >= thr:
                hits[(g.id, r.id)] = hits.get((g.id, r.id), 0) + 1
    padded = res_ids + [None] * len(gt_ids)
    best = 0
    for perm in permutations(padded, len(gt_ids)):
        best = max(best, sum(hits.get((g, h), 0) for g, h in zip(gt_ids, perm)))
    return 2 * best / (len(gt.records) + len(res))


@pytest.fixture
def service():
    return MetricsService()


def test_perfect_result(service):
    rows = _two_walkers()
    report = service.evaluate(_gt(rows), _res(rows))
    assert report.mota == 1.0
    assert report.idf1 == 1.0
    assert (report.idsw, report.fp, report.fn) == (0, 0, 0)
    assert report.num_matches == 20


def test_single_miss(service):
    rows = [(f, 1, float(f), 0.0, 10.0, 10.0) for f in range(1, 11)]
    report = service.evaluate(_gt(rows), _res(rows[:4] + rows[5:]))
    assert (report.fn, report.fp, report.idsw) == (1, 0, 0)
    assert report.mota == pytest.approx(0.9)


def test_permanent_swap(service):
    rows = _two_walkers()
    gt = _gt(rows)
    swapped = [(f, (3 - i) if f >= 6 else i, x, y, w, h) for f, i, x, y, w, h in rows]
    res = _res(swapped)
    report = service.evaluate(gt, res)
    assert report.idsw == 2
    assert report.idf1 == pytest.approx(_brute_force_idf1(gt, res))
    assert report.idf1 == pytest.approx(0.5)


def test_carry_over_keeps_previous_pair(service):
    gt = _gt([(1, 1, 0.0, 0.0, 10.0, 10.0), (2, 1, 0.0, 0.0, 10.0, 10.0)])
    res = _res([
        (1, 1, 0.0, 0.0, 10.0, 10.0), (1, 2, 3.0, 0.0, 10.0, 10.0),
        (2, 1, 3.0, 0.0, 10.0, 10.0), (2, 2, 0.0, 0.0, 10.0, 10.0),
    ])
    report = service.evaluate(gt, res)
    assert report.idsw == 0
    assert report.fp == 2


def test_idf1_matches_brute_force_on_random_instances(service, rng):
    for _ in range(20):
        gt_rows, res_rows = [], []
        for f in range(1, 9):
            for gid in (1, 2, 3):
                x, y = 60.0 * gid, 0.0
                gt_rows.append((f, gid, x, y, 20.0, 20.0))
                if rng.random() < 0.8:
                    rid = int(rng.integers(1, 5))
                    res_rows.append((f, rid, x + float(rng.uniform(-6, 6)), y, 20.0, 20.0))
        # one result id per frame only
        seen, unique = set(), []
        for row in res_rows:
            if (row[0], row[1]) not in seen:
                seen.add((row[0], row[1]))
                unique.append(row)
        gt, res = _gt(gt_rows), _res(unique)
        report = service.evaluate(gt, res)
        assert report.idf1 == pytest.approx(_brute_force_idf1(gt, res))


def _jittered_instance(rng, frames=8):
    gt_rows, res_rows = [], []
    for f in range(1, frames + 1):
        for gid in (1, 2, 3):
            x = 60.0 * gid
            gt_rows.append((f, gid, x, 0.0, 20.0, 20.0))
            if rng.random() < 0.8:
                res_rows.append((f, gid if f < 5 else 4 - gid, x + float(rng.uniform(-6, 6)), 0.0, 20.0, 20.0))
    return gt_rows, res_rows


def _counts(report):
    return report.mota, report.idf1, report.idsw, report.fp, report.fn, report.num_matches


def test_renaming_result_ids_changes_nothing(service, rng):
    for _ in range(10):
        gt_rows, res_rows = _jittered_instance(rng)
        names = {1: 907, 2: 15, 3: 42}
        renamed = [(f, names[i], x, y, w, h) for f, i, x, y, w, h in res_rows]
        gt = _gt(gt_rows)
        assert _counts(service.evaluate(gt, _res(renamed))) == pytest.approx(_counts(service.evaluate(gt, _res(res_rows))))


def test_deleting_false_positives_never_hurts(service, rng):
    gt_rows, res_rows = _jittered_instance(rng)
    clutter = [(f, 50 + f, 900.0, 900.0, 20.0, 20.0) for f in range(1, 9)]
    gt = _gt(gt_rows)
    previous = None
    for keep in range(len(clutter), -1, -1):
        report = service.evaluate(gt, _res(res_rows + clutter[:keep]))
        if previous is not None:
            assert report.fp == previous.fp - 1
            assert report.mota == pytest.approx(previous.mota + 1 / report.num_gt)
            assert report.idf1 >= previous.idf1
            assert (report.idsw, report.fn) == (previous.idsw, previous.fn)
        previous = report


def test_result_order_does_not_matter(service, rng):
    rows = _two_walkers()
    res = _res([(f, (3 - i) if f >= 6 else i, x, y, w, h) for f, i, x, y, w, h in rows])
    shuffled = [res[k] for k in rng.permutation(len(res))]
    assert service.evaluate(_gt(rows), res) == service.evaluate(_gt(rows), shuffled)


def test_all_false_positives_give_negative_mota(service):
    gt = _gt([(1, 1, 0.0, 0.0, 10.0, 10.0), (2, 1, 0.0, 0.0, 10.0, 10.0)])
    res = _res([(f, 9 + k, 500.0 + 20 * k, 500.0, 10.0, 10.0) for f in (1, 2) for k in range(3)])
    report = service.evaluate(gt, res)
    assert (report.fp, report.fn) == (6, 2)
    assert report.mota == pytest.approx(1 - 8 / 2)
    assert report.idf1 == 0.0


def test_empty_ground_truth(service):
    with pytest.raises(EmptyGroundTruthError):
        service.evaluate(GroundTruth(), _res([(1, 1, 0.0, 0.0, 1.0, 1.0)]))


@pytest.mark.parametrize("thr", [0.0, 1.0, 1.5])
def test_threshold_range(service, thr):
    rows = _two_walkers(2)
    with pytest.raises(ValueError):
        service.evaluate(_gt(rows), _res(rows), iou_match_threshold=thr)


def test_aggregate_recomputes_ratios(service):
    rows = [(f, 1, float(f), 0.0, 10.0, 10.0) for f in range(1, 11)]
    perfect = service.evaluate(_gt(rows), _res(rows), name="a")
    missing = service.evaluate(_gt(rows), _res(rows[:5]), name="b")
    total = service.aggregate([perfect, missing])
    assert total.name == "OVERALL"
    assert total.fn == 5 and total.num_gt == 20
    assert total.mota == pytest.approx(0.75)
    assert total.idf1 == pytest.approx(2 * 15 / (20 + 15))


def test_report_text_and_file(service, tmp_path):
    rows = _two_walkers()
    report = service.evaluate(_gt(rows), _res(rows), name="walkers")
    text = format_report([report])
    assert text.splitlines()[-1] == "MOTA=1.000 IDF1=1.000 IDsw=0"
    assert "walkers" in text

    path = tmp_path / "report.txt"
    write_report(str(path), report)
    lines = path.read_text().splitlines()
    assert "MOTA=1.000000" in lines
    assert "IDSW=0" in lines
    assert not any(line.startswith("HOTA") for line in lines)


def test_overlay_plot_is_reproducible(tmp_path):
    rows = _two_walkers()
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    drawn = plot_overlay(_gt(rows), _res(rows), str(first), max_frames=3)
    plot_overlay(_gt(rows), _res(rows), str(second), max_frames=3)
    assert drawn == [1, 5, 10]
    content = first.read_text()
    assert "<svg" in content
    assert first.read_bytes() == second.read_bytes()
