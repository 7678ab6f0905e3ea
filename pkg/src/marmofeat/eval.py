"""Stratified splits, confusion matrices and unweighted average recall."""

from __future__ import annotations

import json
from fractions import Fraction
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SplitError
from .manifest import Manifest, build_label_space, labeled_records, write_manifest

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitSet:
    train: Manifest
    val: Manifest
    test: Manifest
    seed: int
    task: str
    counts: dict  # class -> [n_train, n_val, n_test]

    def parts(self):
        return dict(zip(SPLIT_NAMES, (self.train, self.val, self.test)))


@dataclass(frozen=True)
class EvalReport:
    confusion: np.ndarray
    per_class_recall: np.ndarray
    uar: float
    chance: float

    @property
    def n_c(self) -> int:
        return self.confusion.shape[0]

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "per_class_recall": [float(v) for v in self.per_class_recall],
            "uar": float(self.uar),
            "n_c": self.n_c,
            "chance": float(self.chance),
        }


def allocate_counts(n: int, weights=(7, 2, 1)) -> list[int]:
    """Largest-remainder split of n items by integer weights; ties favour the smaller splits."""
    total = sum(weights)
    counts = [n * w // total for w in weights]
    remainders = [n * w % total for w in weights]
    order = sorted(range(len(weights)), key=lambda i: (-remainders[i], -i))
    for i in order[:n - sum(counts)]:
        counts[i] += 1
    return counts


def split_dataset(manifest: Manifest, task: str, seed: int) -> SplitSet:
    """Per-class 70:20:10 split; every class must land in all three parts."""
    space = build_label_space(manifest, task)
    records = labeled_records(manifest, task)
    by_class = {c: [] for c in space.classes}
    for r in records:
        by_class[r.label(task)].append(r)

    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    counts = {}
    for cls in space.classes:
        members = by_class[cls]
        if len(members) < 3:
            raise SplitError(f"class {cls!r} of task {task} has {len(members)} segment(s); need >= 3")
        alloc = allocate_counts(len(members))
        if min(alloc) == 0:
            missing = SPLIT_NAMES[alloc.index(0)]
            raise SplitError(f"class {cls!r} of task {task} ({len(members)} segments) "
                             f"gets no {missing} segment")
        order = rng.permutation(len(members))
        start = 0
        for part, k in zip(parts, alloc):
            part.extend(members[i] for i in order[start:start + k])
            start += k
        counts[cls] = alloc
    # restore manifest order inside each part
    position = {r.segment_id: i for i, r in enumerate(manifest.records)}
    train, val, test = (manifest.subset(sorted(p, key=lambda r: position[r.segment_id])) for p in parts)
    return SplitSet(train, val, test, seed, task, counts)


def write_split(split: SplitSet, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, part in split.parts().items():
        paths[name] = out_dir / f"{name}.csv"
        write_manifest(part, paths[name])
    sidecar = {"seed": split.seed, "task": split.task,
               "counts": {c: dict(zip(SPLIT_NAMES, v)) for c, v in split.counts.items()}}
    paths["sidecar"] = out_dir / "split.json"
    paths["sidecar"].write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return paths


def confusion_matrix(preds, truths, n_c: int) -> np.ndarray:
    """Counts with rows = truth, columns = prediction."""
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape:
        raise ValueError("predictions and truths differ in length")
    for arr, what in ((preds, "prediction"), (truths, "truth")):
        if arr.size and (arr.min() < 0 or arr.max() >= n_c):
            raise ValueError(f"{what} label outside [0, {n_c})")
    cm = np.zeros((n_c, n_c), dtype=np.int64)
    np.add.at(cm, (truths, preds), 1)
    return cm


def per_class_recall(confusion) -> np.ndarray:
    cm = np.asarray(confusion, dtype=np.float64)
    rows = cm.sum(axis=1)
    if np.any(rows == 0):
        empty = np.flatnonzero(rows == 0).tolist()
        raise ValueError(f"classes {empty} have no test items")
    return np.diag(cm) / rows


def uar(confusion) -> float:
    """Unweighted average recall in percent, correctly rounded from the integer counts."""
    cm = np.asarray(confusion)
    per_class_recall(cm)  # validates non-empty rows
    total = sum(Fraction(int(cm[i, i]), int(cm[i].sum())) for i in range(cm.shape[0]))
    return float(100 * total / cm.shape[0])


def chance_level(n_c: int) -> float:
    if n_c < 2:
        raise ValueError(f"chance level needs at least 2 classes, got {n_c}")
    return 100.0 / n_c


def evaluate(preds, truths, n_c: int) -> EvalReport:
    cm = confusion_matrix(preds, truths, n_c)
    recalls = per_class_recall(cm)
    return EvalReport(cm, recalls, float(100.0 * recalls.mean()), chance_level(n_c))
