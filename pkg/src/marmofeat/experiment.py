"""Config-driven experiments: split, materialise features, train, evaluate, tabulate.

Experiment config (INI)::

    [experiment]
    dataset_manifest = data/manifest.csv   ; relative to this file
    dataset_name = D1                      ; optional, defaults to the manifest stem
    task = CTID                            ; CTID | CLID | SID
    feature = C22                          ; C22 | WLM | E2E
    sample_rate = 44100                    ; C22/E2E: rate the audio is resampled to
    wlm_layer = 6                          ; WLM only, 0..12
    embedding_dir = embeddings             ; WLM only
    seed = 0
    output_dir = runs/d1_ctid_c22
    shuffle_labels = false                 ; permutation control

    [train]                                ; any TrainConfig field
    max_epochs = 30
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .audio_io import ResampleSpec, Waveform, read_wav, resample, slice_segment
from .catch24 import compute_catch24
from .embeddings import N_LAYERS, load_pooled_layer
from .errors import DataError, ManifestError
from .eval import EvalReport, evaluate, split_dataset, write_split
from .manifest import TASK_FIELDS, Manifest, TaskLabelSpace, build_label_space, load_manifest
from .nnet import (CNNSpec, LinearProbeSpec, MLPSpec, Model, TrainConfig, init_model,
                   load_checkpoint, predict_batch, save_checkpoint, train)
from .nnet.train import write_history

log = logging.getLogger(__name__)

FEATURES = ("C22", "WLM", "E2E")
WLM_SAMPLE_RATE = 16000
REPORT_NAME = "report.json"
CHECKPOINT_NAME = "model.mkm"
HISTORY_NAME = "history.csv"


def default_train_config(feature: str) -> TrainConfig:
    if feature == "E2E":
        return TrainConfig(max_epochs=100, early_stop_patience=20)
    return TrainConfig(max_epochs=30)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_manifest: Path
    task: str
    feature: str
    sample_rate: int
    output_dir: Path
    seed: int = 0
    wlm_layer: int | None = None
    embedding_dir: Path | None = None
    dataset_name: str | None = None
    shuffle_labels: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.task not in TASK_FIELDS:
            raise ManifestError(f"unknown task {self.task!r}")
        if self.feature not in FEATURES:
            raise DataError(f"unknown feature {self.feature!r}; expected one of {FEATURES}")
        if self.sample_rate <= 0:
            raise DataError("sample_rate must be positive")
        if self.feature == "WLM":
            if self.wlm_layer is None or not 0 <= self.wlm_layer < N_LAYERS:
                raise DataError(f"WLM needs wlm_layer in 0..{N_LAYERS - 1}")
            if self.embedding_dir is None:
                raise DataError("WLM needs embedding_dir")
            if self.sample_rate != WLM_SAMPLE_RATE:
                raise DataError(f"WLM embeddings assume {WLM_SAMPLE_RATE} Hz audio, got {self.sample_rate}")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed, train=replace(self.train, seed=seed))


def _train_config_from_section(section, base: TrainConfig) -> TrainConfig:
    kwargs = {}
    for f in fields(TrainConfig):
        if f.name not in section:
            continue
        raw = section[f.name].strip()
        if f.name == "early_stop_patience":
            kwargs[f.name] = None if raw.lower() in ("", "none") else int(raw)
        elif f.name in ("batch_size", "max_epochs", "scheduler_patience", "seed"):
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    unknown = set(section) - {f.name for f in fields(TrainConfig)}
    if unknown:
        raise DataError(f"unknown [train] keys {sorted(unknown)}")
    return replace(base, **kwargs)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path, encoding="utf-8"):
        raise DataError(f"cannot read config {path}")
    if "experiment" not in parser:
        raise DataError(f"{path}: missing [experiment] section")
    ex = parser["experiment"]
    base = path.parent

    def rel(key):
        value = ex.get(key)
        if value is None or not value.strip():
            return None
        p = Path(value.strip())
        return p if p.is_absolute() else base / p

    try:
        feature = ex["feature"].strip().upper()
        seed = ex.getint("seed", 0)
        cfg = ExperimentConfig(
            dataset_manifest=rel("dataset_manifest"),
            task=ex["task"].strip().upper(),
            feature=feature,
            sample_rate=ex.getint("sample_rate", WLM_SAMPLE_RATE if feature == "WLM" else 44100),
            output_dir=rel("output_dir") or base / "output",
            seed=seed,
            wlm_layer=ex.getint("wlm_layer") if ex.get("wlm_layer") else None,
            embedding_dir=rel("embedding_dir"),
            dataset_name=ex.get("dataset_name"),
            shuffle_labels=ex.getboolean("shuffle_labels", False),
            train=_train_config_from_section(parser["train"] if "train" in parser else {},
                                             replace(default_train_config(feature), seed=seed)),
        )
    except KeyError as exc:
        raise DataError(f"{path}: missing key {exc}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if cfg.dataset_manifest is None:
        raise DataError(f"{path}: missing dataset_manifest")
    return cfg


def write_config(cfg: ExperimentConfig, path) -> None:
    """Inverse of :func:`load_config`, with absolute paths."""
    parser = configparser.ConfigParser()
    ex = {"dataset_manifest": str(Path(cfg.dataset_manifest).resolve()), "task": cfg.task,
          "feature": cfg.feature, "sample_rate": str(cfg.sample_rate), "seed": str(cfg.seed),
          "output_dir": str(Path(cfg.output_dir).resolve()),
          "shuffle_labels": str(cfg.shuffle_labels).lower()}
    if cfg.wlm_layer is not None:
        ex["wlm_layer"] = str(cfg.wlm_layer)
    if cfg.embedding_dir is not None:
        ex["embedding_dir"] = str(Path(cfg.embedding_dir).resolve())
    if cfg.dataset_name:
        ex["dataset_name"] = cfg.dataset_name
    parser["experiment"] = ex
    parser["train"] = {f.name: "none" if getattr(cfg.train, f.name) is None else repr(getattr(cfg.train, f.name))
                       for f in fields(TrainConfig)}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


class AudioCache:
    """Whole-file reads, resampled once per (path, rate)."""

    def __init__(self):
        self._store: dict[tuple[Path, int], Waveform] = {}

    def get(self, path: Path, rate: int) -> Waveform:
        key = (Path(path).resolve(), rate)
        if key not in self._store:
            w = read_wav(path)
            if w.sample_rate != rate:
                w = resample(w, ResampleSpec(rate))
            self._store[key] = w
        return self._store[key]


def load_segments(manifest: Manifest, rate: int, cache: AudioCache | None = None) -> list[Waveform]:
    cache = cache or AudioCache()
    return [slice_segment(cache.get(manifest.resolve(r), rate), r.start_s, r.end_s) for r in manifest.records]


def materialize(cfg: ExperimentConfig, manifest: Manifest, cache: AudioCache | None = None):
    """Model inputs for every record: a feature matrix, or a list of waveforms for E2E."""
    if cfg.feature == "WLM":
        return load_pooled_layer(cfg.embedding_dir, [r.segment_id for r in manifest.records], cfg.wlm_layer)
    segments = load_segments(manifest, cfg.sample_rate, cache)
    if cfg.feature == "C22":
        return np.vstack([compute_catch24(w).values for w in segments])
    return [w.samples.astype(np.float32) for w in segments]


def fit_standardizer(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def build_model(cfg: ExperimentConfig, n_c: int, input_dim: int | None) -> Model:
    if cfg.feature == "E2E":
        return init_model(CNNSpec.for_sample_rate(cfg.sample_rate, n_c), cfg.seed, np.float32)
    return init_model(MLPSpec(input_dim, n_c), cfg.seed)


def shuffled(labels: np.ndarray, seed: int) -> np.ndarray:
    return np.random.default_rng([seed, 0x5EED]).permutation(labels)


@dataclass
class TrainArtifacts:
    model: Model
    space: TaskLabelSpace
    split: object
    test_inputs: object
    test_labels: np.ndarray


def train_experiment(cfg: ExperimentConfig, progress=None) -> TrainArtifacts:
    """Split, materialise and train; writes split files, checkpoint and history."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(cfg.dataset_manifest, cfg.dataset_name)
    space = build_label_space(manifest, cfg.task)
    split = split_dataset(manifest, cfg.task, cfg.seed)
    write_split(split, out / "split")

    cache = AudioCache()
    x_tr, x_va, x_te = (materialize(cfg, part, cache) for part in (split.train, split.val, split.test))
    y_tr, y_va, y_te = (space.encode(part.records) for part in (split.train, split.val, split.test))
    if cfg.shuffle_labels:
        y_tr, y_va = shuffled(y_tr, cfg.seed), shuffled(y_va, cfg.seed + 1)

    model = build_model(cfg, space.n_c, None if cfg.feature == "E2E" else x_tr.shape[1])
    if cfg.feature != "E2E":
        model.set_standardizer(*fit_standardizer(x_tr))
    train(model, (x_tr, y_tr), (x_va, y_va), cfg.train, progress)
    save_checkpoint(model, out / CHECKPOINT_NAME)
    write_history(model.history, out / HISTORY_NAME)
    return TrainArtifacts(model, space, split, x_te, y_te)


def report_dict(cfg: ExperimentConfig, report: EvalReport, space: TaskLabelSpace, model: Model) -> dict:
    return {
        "dataset": cfg.dataset_name or Path(cfg.dataset_manifest).stem,
        "task": cfg.task,
        "feature": cfg.feature,
        "sample_rate": cfg.sample_rate,
        "wlm_layer": cfg.wlm_layer,
        "seed": cfg.seed,
        "shuffle_labels": cfg.shuffle_labels,
        "classes": list(space.classes),
        "best_epoch": model.best_epoch,
        "epochs_run": len(model.history),
        **report.to_dict(),
    }


def write_report(d: dict, path) -> None:
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def evaluate_experiment(cfg: ExperimentConfig, model: Model | None = None, artifacts: TrainArtifacts | None = None) -> dict:
    """Evaluate on the test split and write ``report.json``."""
    out = Path(cfg.output_dir)
    if artifacts is not None:
        model, space, x_te, y_te = artifacts.model, artifacts.space, artifacts.test_inputs, artifacts.test_labels
    else:
        model = model or load_checkpoint(out / CHECKPOINT_NAME)
        full = load_manifest(cfg.dataset_manifest, cfg.dataset_name)
        space = build_label_space(full, cfg.task)
        test_path = out / "split" / "test.csv"
        if not test_path.is_file():
            raise DataError(f"no test split at {test_path}; run train first")
        test = load_manifest(test_path, cfg.dataset_name)
        x_te, y_te = materialize(cfg, test), space.encode(test.records)
    report = evaluate(predict_batch(model, x_te), y_te, space.n_c)
    d = report_dict(cfg, report, space, model)
    write_report(d, out / REPORT_NAME)
    return d


def run_experiment(cfg: ExperimentConfig, progress=None) -> dict:
    artifacts = train_experiment(cfg, progress)
    return evaluate_experiment(cfg, artifacts=artifacts)


# ---------------------------------------------------------------- layer probes

def probe_layers(manifest_path, embedding_dir, tasks, seed: int, out_dir,
                 train_config: TrainConfig | None = None, layers=range(N_LAYERS)):
    """Train one linear probe per (task, layer); returns (raw UAR matrix, tasks)."""
    from .analysis import export_plot_data, normalize_layer_matrix

    train_config = replace(train_config or TrainConfig(max_epochs=30), seed=seed)
    manifest = load_manifest(manifest_path)
    raw = np.zeros((len(tasks), len(layers)))
    for ti, task in enumerate(tasks):
        space = build_label_space(manifest, task)
        split = split_dataset(manifest, task, seed)
        ids = [[r.segment_id for r in part.records] for part in (split.train, split.val, split.test)]
        ys = [space.encode(part.records) for part in (split.train, split.val, split.test)]
        for li, layer in enumerate(layers):
            x_tr, x_va, x_te = (load_pooled_layer(embedding_dir, i, layer) for i in ids)
            model = init_model(LinearProbeSpec(x_tr.shape[1], space.n_c), seed)
            model.set_standardizer(*fit_standardizer(x_tr))
            train(model, (x_tr, ys[0]), (x_va, ys[1]), train_config)
            raw[ti, li] = evaluate(predict_batch(model, x_te), ys[2], space.n_c).uar
            log.info("probe %s layer %d: UAR %.2f", task, layer, raw[ti, li])
    matrix = normalize_layer_matrix(raw, tuple(tasks))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    export_plot_data(matrix, out_dir / "layer_matrix.csv")
    return matrix


# ---------------------------------------------------------------- results table

TABLE_TASKS = ("CTID", "CLID", "SID")


def emit_results_table(reports: list[dict], out_dir) -> list[dict]:
    """Write results.csv and results.txt; best UAR per dataset and task gets a '*'."""
    if not reports:
        raise DataError("no reports to tabulate")
    cells: dict[tuple, float] = {}
    for r in reports:
        key = (r["dataset"], r["feature"], int(r["sample_rate"]), r["task"])
        if key in cells and cells[key] != r["uar"]:
            raise DataError(f"conflicting results for {key}: {cells[key]} vs {r['uar']}")
        cells[key] = float(r["uar"])

    rows = {}
    for (ds, feat, sr, task), value in cells.items():
        rows.setdefault((ds, feat, sr), {})[task] = value
    best = {}
    for (ds, _, _, task), value in cells.items():
        best[(ds, task)] = max(best.get((ds, task), -np.inf), value)

    table = []
    for (ds, feat, sr) in sorted(rows):
        row = {"dataset": ds, "feature": feat, "sr": sr}
        for task in TABLE_TASKS:
            v = rows[(ds, feat, sr)].get(task)
            row[task] = v
            row[f"{task}_best"] = v is not None and v == best[(ds, task)]
        table.append(row)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "feature", "sr"] + [c for t in TABLE_TASKS for c in (t, f"{t}_best")])
        for row in table:
            w.writerow([row["dataset"], row["feature"], row["sr"]]
                       + [c for t in TABLE_TASKS
                          for c in ("N/A" if row[t] is None else repr(row[t]), int(row[f"{t}_best"]))])
    (out_dir / "results.txt").write_text(format_table(table), encoding="utf-8")
    return table


def format_table(table: list[dict]) -> str:
    header = ["D", "F", "SR"] + list(TABLE_TASKS)
    lines = [header]
    for row in table:
        cells = [row["dataset"], row["feature"], f"{row['sr'] / 1000:g}k"]
        for t in TABLE_TASKS:
            v = row[t]
            cells.append("N/A" if v is None else f"{v:.2f}" + ("*" if row[f"{t}_best"] else ""))
        lines.append(cells)
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    text = ["  ".join(c.ljust(wd) for c, wd in zip(line, widths)).rstrip() for line in lines]
    text.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(text) + "\n"
