import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from marmofeat.errors import InsufficientClassesError, ManifestError, SplitError
from marmofeat.eval import (allocate_counts, chance_level, confusion_matrix, evaluate, per_class_recall,
                            split_dataset, uar, write_split)
from marmofeat.manifest import (Manifest, SegmentRecord, build_label_space, duration_stats, load_manifest,
                                write_manifest)

HEADER = "segment_id,wav_path,start_s,end_s,call_type,caller_id,sex\n"


def write_csv(path, rows):
    path.write_text(HEADER + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


def make_manifest(counts: dict) -> Manifest:
    recs = [SegmentRecord(f"{label}_{i}", "x.wav", 0.0, 0.1, call_type=label)
            for label, n in counts.items() for i in range(n)]
    return Manifest(tuple(recs))


def test_load_three_rows(tmp_path):
    p = write_csv(tmp_path / "m.csv", ["a,w/a.wav,0.0,0.5,phee,c1,f", "b,w/a.wav,0.5,0.75,trill,c2,",
                                       "c,/abs/b.wav,1,2,,c1,m"])
    m = load_manifest(p)
    assert [r.segment_id for r in m] == ["a", "b", "c"]
    assert m.records[1] == SegmentRecord("b", "w/a.wav", 0.5, 0.75, "trill", "c2", None)
    assert m.records[2].call_type is None
    assert m.resolve(m.records[0]) == tmp_path / "w/a.wav"


def test_noise_rows_dropped(tmp_path):
    p = write_csv(tmp_path / "m.csv", ["a,x.wav,0,1,Noise,,", "b,x.wav,0,1,phee,,", "c,x.wav,0,1,SILENCE,,"])
    m = load_manifest(p)
    assert len(m) == 1 and m.dropped == 2
    write_manifest(m, tmp_path / "again.csv")
    assert load_manifest(tmp_path / "again.csv").records == m.records


@pytest.mark.parametrize("row,msg", [("a,x.wav,1.0,1.0,p,,", "line 2"), ("a,x.wav,zero,1,p,,", "malformed"),
                                     ("a,x.wav,-1,1,p,,", "invalid")])
def test_bad_times(tmp_path, row, msg):
    with pytest.raises(ManifestError, match=msg):
        load_manifest(write_csv(tmp_path / "m.csv", [row]))


def test_duplicates_and_missing_columns(tmp_path):
    with pytest.raises(ManifestError, match="duplicate"):
        load_manifest(write_csv(tmp_path / "m.csv", ["a,x.wav,0,1,p,,", "a,x.wav,1,2,p,,"]))
    (tmp_path / "n.csv").write_text("segment_id,wav_path,start_s\na,x,0\n")
    with pytest.raises(ManifestError, match="missing columns"):
        load_manifest(tmp_path / "n.csv")


def test_label_space():
    m = make_manifest({"twitter": 2, "phee": 3, "trill": 1})
    space = build_label_space(m, "CTID")
    assert space.classes == ("phee", "trill", "twitter") and space.n_c == 3
    reordered = Manifest(tuple(reversed(m.records)) + m.records[:1])
    assert build_label_space(reordered, "CTID") == space
    with pytest.raises(InsufficientClassesError):
        build_label_space(m, "SID")


def test_duration_stats():
    recs = tuple(SegmentRecord(str(i), "x", 1.0, 1.0 + d) for i, d in enumerate([0.1, 0.2, 0.3]))
    s = duration_stats(Manifest(recs))
    assert s.median_ms == pytest.approx(200.0) and s.total_minutes == pytest.approx(0.01) and s.count == 3
    d = np.random.default_rng(0).uniform(0.01, 2, 1000)
    s = duration_stats(Manifest(tuple(SegmentRecord(str(i), "x", 0.0, v) for i, v in enumerate(d))))
    srt = sorted(d)
    assert s.median_ms == pytest.approx((srt[499] + srt[500]) / 2 * 1000)
    with pytest.raises(ManifestError):
        duration_stats(Manifest(()))


def test_allocation_arithmetic():
    assert allocate_counts(100) == [70, 20, 10]
    assert allocate_counts(10) == [7, 2, 1]
    assert allocate_counts(5) == [3, 1, 1]
    assert allocate_counts(3) == [2, 1, 0]
    for n in range(3, 200):
        c = allocate_counts(n)
        assert sum(c) == n and all(abs(k - n * r) < 1 for k, r in zip(c, (0.7, 0.2, 0.1)))


def test_split_stratified_and_deterministic(tmp_path):
    m = make_manifest({"a": 100, "b": 10})
    s1, s2, s3 = split_dataset(m, "CTID", 1), split_dataset(m, "CTID", 1), split_dataset(m, "CTID", 2)
    assert s1.counts == {"a": [70, 20, 10], "b": [7, 2, 1]}
    ids = [{r.segment_id for r in part} for part in (s1.train, s1.val, s1.test)]
    assert sum(map(len, ids)) == 110 and len(set.union(*ids)) == 110
    assert [p.records for p in s1.parts().values()] == [p.records for p in s2.parts().values()]
    assert s3.train.records != s1.train.records and s3.counts == s1.counts
    paths = write_split(s1, tmp_path)
    sidecar = json.loads(paths["sidecar"].read_text())
    assert sidecar["seed"] == 1 and sidecar["counts"]["b"] == {"train": 7, "val": 2, "test": 1}
    assert len(load_manifest(paths["test"])) == 11


def test_split_errors():
    with pytest.raises(SplitError, match="need >= 3"):
        split_dataset(make_manifest({"a": 10, "b": 2}), "CTID", 0)
    with pytest.raises(SplitError, match="no test"):
        split_dataset(make_manifest({"a": 10, "b": 4}), "CTID", 0)


def test_confusion_examples():
    assert_array_equal(confusion_matrix([0, 1, 2], [0, 1, 2], 3), np.eye(3, dtype=int))
    cm = confusion_matrix([1], [0], 2)
    assert_array_equal(cm, [[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        confusion_matrix([3], [0], 3)


def test_uar_examples():
    assert uar(np.diag([5, 3, 9])) == 100.0
    assert uar([[4, 0], [2, 2]]) == 75.0
    with pytest.raises(ValueError):
        uar([[1, 0], [0, 0]])
    assert chance_level(11) == pytest.approx(9.0909090909)
    assert chance_level(2) == 50.0
    assert chance_level(12) == pytest.approx(8.3333333333)
    with pytest.raises(ValueError):
        chance_level(1)


def test_uar_properties():
    rng = np.random.default_rng(0)
    truths = rng.integers(0, 4, 300)
    preds = rng.integers(0, 4, 300)
    base = evaluate(preds, truths, 4)
    dup = truths == 2
    doubled = evaluate(np.concatenate([preds, preds[dup]]), np.concatenate([truths, truths[dup]]), 4)
    assert doubled.uar == pytest.approx(base.uar, abs=1e-12)
    assert_array_equal(base.confusion.sum(axis=1), np.bincount(truths, minlength=4))
    assert evaluate(np.zeros(300, int), truths, 4).uar == pytest.approx(25.0)
    assert base.uar == pytest.approx(100 * per_class_recall(base.confusion).mean())
