"""Segment manifests: CSV ingestion, label spaces and duration statistics.

Manifest CSV header (UTF-8, one record per line)::

    segment_id,wav_path,start_s,end_s,call_type,caller_id,sex

An empty label field means the label is absent. Relative ``wav_path`` values
resolve against the manifest's directory.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InsufficientClassesError, ManifestError

log = logging.getLogger(__name__)

COLUMNS = ("segment_id", "wav_path", "start_s", "end_s", "call_type", "caller_id", "sex")
TASK_FIELDS = {"CTID": "call_type", "CLID": "caller_id", "SID": "sex"}
DISCARDED_CALL_TYPES = frozenset({"silence", "noise"})


@dataclass(frozen=True)
class SegmentRecord:
    segment_id: str
    wav_path: str
    start_s: float
    end_s: float
    call_type: str | None = None
    caller_id: str | None = None
    sex: str | None = None

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def label(self, task: str) -> str | None:
        return getattr(self, task_field(task))


@dataclass(frozen=True)
class Manifest:
    records: tuple[SegmentRecord, ...]
    dataset_name: str = "dataset"
    native_sr: int | None = None
    base_dir: Path = field(default_factory=Path)
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def resolve(self, record: SegmentRecord) -> Path:
        p = Path(record.wav_path)
        return p if p.is_absolute() else self.base_dir / p

    def subset(self, records) -> "Manifest":
        return replace(self, records=tuple(records), dropped=0)


@dataclass(frozen=True)
class TaskLabelSpace:
    task: str
    classes: tuple[str, ...]

    @property
    def n_c(self) -> int:
        return len(self.classes)

    def index(self, label: str) -> int:
        return self.classes.index(label)

    def encode(self, records) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.classes)}
        return np.array([lookup[r.label(self.task)] for r in records], dtype=np.int64)


@dataclass(frozen=True)
class DurationStats:
    median_ms: float
    total_minutes: float
    count: int


def task_field(task: str) -> str:
    try:
        return TASK_FIELDS[task]
    except KeyError:
        raise ManifestError(f"unknown task {task!r}; expected one of {sorted(TASK_FIELDS)}") from None


def _parse_time(value: str, column: str, line: int) -> float:
    try:
        t = float(value)
    except (TypeError, ValueError):
        raise ManifestError(f"line {line}: malformed {column} {value!r}") from None
    if not np.isfinite(t) or t < 0:
        raise ManifestError(f"line {line}: invalid {column} {value!r}")
    return t


def load_manifest(path, dataset_name: str | None = None, native_sr: int | None = None) -> Manifest:
    """Parse a manifest CSV, dropping silence/noise rows."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot open manifest {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ManifestError(f"{path}: missing columns {missing}")
        records, seen, dropped = [], set(), 0
        for line, row in enumerate(reader, start=2):
            sid = (row["segment_id"] or "").strip()
            if not sid:
                raise ManifestError(f"line {line}: empty segment_id")
            if sid in seen:
                raise ManifestError(f"line {line}: duplicate segment_id {sid!r}")
            seen.add(sid)
            start = _parse_time(row["start_s"], "start_s", line)
            end = _parse_time(row["end_s"], "end_s", line)
            if end <= start:
                raise ManifestError(f"line {line} ({sid}): end_s {end} <= start_s {start}")
            labels = {k: (row[k] or "").strip() or None for k in ("call_type", "caller_id", "sex")}
            if labels["call_type"] is not None and labels["call_type"].lower() in DISCARDED_CALL_TYPES:
                dropped += 1
                continue
            records.append(SegmentRecord(sid, row["wav_path"].strip(), start, end, **labels))
    if dropped:
        log.info("%s: dropped %d silence/noise segments", path, dropped)
    return Manifest(tuple(records), dataset_name or path.stem, native_sr, path.parent, dropped)


def write_manifest(manifest: Manifest, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in manifest.records:
            wav = r.wav_path
            if wav and not Path(wav).is_absolute():
                # keep paths valid relative to the new manifest location
                wav = Path(_relpath(manifest.base_dir / wav, path.parent)).as_posix()
            w.writerow([r.segment_id, wav, repr(r.start_s), repr(r.end_s),
                        r.call_type or "", r.caller_id or "", r.sex or ""])


def _relpath(target: Path, start: Path) -> str:
    return os.path.relpath(os.path.abspath(target), os.path.abspath(start))


def labeled_records(manifest: Manifest, task: str) -> list[SegmentRecord]:
    return [r for r in manifest.records if r.label(task) is not None]


def build_label_space(manifest: Manifest, task: str) -> TaskLabelSpace:
    """Lexicographically indexed classes of ``task``; unlabeled records are ignored."""
    classes = sorted({r.label(task) for r in labeled_records(manifest, task)})
    if len(classes) < 2:
        raise InsufficientClassesError(
            f"task {task} has {len(classes)} class(es) in {manifest.dataset_name}; need at least 2")
    return TaskLabelSpace(task, tuple(classes))


def duration_stats(manifest: Manifest) -> DurationStats:
    if not manifest.records:
        raise ManifestError("duration statistics of an empty manifest")
    d = np.array([r.duration_s for r in manifest.records])
    return DurationStats(float(np.median(d) * 1000.0), float(d.sum() / 60.0), d.size)
