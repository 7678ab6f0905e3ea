"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure,
1 anything else.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import DataError, NumericError

EXIT_OK, EXIT_OTHER, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3, 4

log = logging.getLogger("marmofeat")


def _experiment_config(args):
    from .experiment import load_config
    if not args.config:
        raise DataError(f"{args.command} needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.output:
        cfg = replace(cfg, output_dir=Path(args.output))
    return cfg


def _print_report(d: dict) -> None:
    print(f"{d['dataset']} {d['task']} {d['feature']} {d['sample_rate']} Hz: "
          f"UAR {d['uar']:.2f} (chance {d['chance']:.2f})")


def cmd_split(args) -> None:
    from .eval import split_dataset, write_split
    from .manifest import load_manifest
    cfg = _experiment_config(args)
    split = split_dataset(load_manifest(cfg.dataset_manifest, cfg.dataset_name), cfg.task, cfg.seed)
    paths = write_split(split, Path(cfg.output_dir) / "split")
    for name in ("train", "val", "test"):
        print(f"{name}: {len(split.parts()[name])} segments -> {paths[name]}")


def cmd_extract_features(args) -> None:
    from .catch24 import CATCH24_NAMES, compute_catch24
    from .experiment import load_segments, materialize
    from .manifest import load_manifest
    cfg = _experiment_config(args)
    if cfg.feature == "E2E":
        raise DataError("E2E consumes raw waveforms; there are no features to extract")
    manifest = load_manifest(cfg.dataset_manifest, cfg.dataset_name)
    if cfg.feature == "C22":
        vectors = [compute_catch24(w) for w in load_segments(manifest, cfg.sample_rate)]
        header = list(CATCH24_NAMES) + [f"nan_{n}" for n in CATCH24_NAMES]
        rows = [[repr(float(v)) for v in fv.values] + [int(b) for b in fv.nan_mask] for fv in vectors]
    else:
        x = materialize(cfg, manifest)
        header = [f"f{i}" for i in range(x.shape[1])]
        rows = [[repr(float(v)) for v in row] for row in x]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "features.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment_id"] + header)
        for rec, row in zip(manifest.records, rows):
            w.writerow([rec.segment_id] + row)
    print(f"{len(rows)} feature rows -> {path}")


def _progress(row) -> None:
    log.info("epoch %d  loss %.4g  val UAR %.2f  lr %.2g",
             row["epoch"], row["train_loss"], row["val_uar"], row["lr"])


def cmd_train(args) -> None:
    from .experiment import train_experiment
    cfg = _experiment_config(args)
    art = train_experiment(cfg, _progress)
    best = art.model.history[art.model.best_epoch - 1]
    print(f"best epoch {art.model.best_epoch}: val UAR {best['val_uar']:.2f}; "
          f"checkpoint in {cfg.output_dir}")


def cmd_eval(args) -> None:
    from .experiment import evaluate_experiment
    from .nnet import load_checkpoint
    cfg = _experiment_config(args)
    model = load_checkpoint(args.checkpoint) if args.checkpoint else None
    _print_report(evaluate_experiment(cfg, model=model))


def cmd_probe_layers(args) -> None:
    from .experiment import probe_layers
    from .nnet import TrainConfig
    if not args.config:
        raise DataError("probe-layers needs --config")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(args.config, encoding="utf-8") or "probe" not in parser:
        raise DataError(f"{args.config}: missing [probe] section")
    sec, base = parser["probe"], Path(args.config).parent
    try:
        tasks = [t.strip().upper() for t in sec["tasks"].split(",") if t.strip()]
        manifest, emb = base / sec["dataset_manifest"], base / sec["embedding_dir"]
        seed = args.seed if args.seed is not None else sec.getint("seed", 0)
        epochs = sec.getint("max_epochs", 30)
    except (KeyError, ValueError) as exc:
        raise DataError(f"{args.config}: bad [probe] section: {exc}") from None
    out = Path(args.output) if args.output else base / sec.get("output_dir", "probe")
    matrix = probe_layers(manifest, emb, tasks, seed, out, TrainConfig(max_epochs=epochs))
    for task, raw in zip(matrix.tasks, matrix.raw_uar):
        print(f"{task}: best layer {int(raw.argmax())} (UAR {raw.max():.2f})")
    print(f"matrix -> {out / 'layer_matrix.csv'}")


def cmd_freq_response(args) -> None:
    from .analysis import cumulative_response, export_plot_data, filter_bank_from_model
    from .nnet import CNNSpec, load_checkpoint
    if args.checkpoint:
        ckpt = Path(args.checkpoint)
        out = Path(args.output) if args.output else ckpt.parent
    else:
        cfg = _experiment_config(args)
        out = Path(cfg.output_dir)
        ckpt = out / "model.mkm"
    model = load_checkpoint(ckpt)
    if not isinstance(model.spec, CNNSpec):
        raise DataError(f"{ckpt} is not a raw-waveform model")
    out.mkdir(parents=True, exist_ok=True)
    files = export_plot_data(cumulative_response(filter_bank_from_model(model)),
                             out / "freq_response.csv", svg=args.svg)
    print("\n".join(str(f) for f in files))


def cmd_make_synthetic(args) -> None:
    from .synthetic import EmbeddingSetSpec, ToneSpec, make_synthetic_dataset, make_synthetic_embeddings
    if not args.output:
        raise DataError("make-synthetic needs --output")
    overrides = {}
    if args.config:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        parser.read(args.config, encoding="utf-8")
        if "synthetic" in parser:
            overrides = dict(parser["synthetic"])
    seed = args.seed if args.seed is not None else int(overrides.pop("seed", 0))
    overrides.pop("seed", None)
    try:
        if args.kind == "tones":
            if "frequencies_hz" in overrides:
                overrides["frequencies_hz"] = tuple(float(f) for f in overrides["frequencies_hz"].split(","))
            spec = _typed(ToneSpec, overrides)
            path = make_synthetic_dataset(spec, seed, args.output)
        else:
            path = make_synthetic_embeddings(_typed(EmbeddingSetSpec, overrides), seed, args.output)
    except (TypeError, ValueError) as exc:
        raise DataError(f"invalid synthetic spec: {exc}") from None
    print(f"manifest -> {path}")


def _typed(cls, overrides: dict):
    defaults = cls()
    kwargs = {}
    for key, raw in overrides.items():
        if not hasattr(defaults, key):
            raise ValueError(f"unknown key {key!r}")
        current = getattr(defaults, key)
        kwargs[key] = raw if isinstance(current, tuple) else type(current)(raw)
    return replace(defaults, **kwargs)


def cmd_report(args) -> None:
    from .experiment import REPORT_NAME, emit_results_table
    paths = []
    for p in map(Path, args.reports):
        paths += sorted(p.rglob(REPORT_NAME)) if p.is_dir() else [p]
    if not paths:
        raise DataError("no report files found")
    reports = []
    for p in paths:
        try:
            reports.append(json.loads(p.read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read report {p}: {exc}") from None
    out = Path(args.output) if args.output else Path(".")
    emit_results_table(reports, out)
    print((out / "results.txt").read_text(), end="")


COMMANDS = {
    "split": (cmd_split, "stratified 70:20:10 split of the manifest"),
    "extract-features": (cmd_extract_features, "write catch24 or pooled-embedding features as CSV"),
    "train": (cmd_train, "split, train and write checkpoint + history"),
    "eval": (cmd_eval, "evaluate a trained checkpoint on the test split"),
    "probe-layers": (cmd_probe_layers, "linear probes over the 13 embedding layers"),
    "freq-response": (cmd_freq_response, "cumulative frequency response of first-layer filters"),
    "make-synthetic": (cmd_make_synthetic, "generate a synthetic tone or embedding dataset"),
    "report": (cmd_report, "tabulate report.json files"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--output", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="marmofeat", description="Vocalization classification toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {name: sub.add_parser(name, parents=[common], help=helptext)
            for name, (_, helptext) in COMMANDS.items()}
    subs["eval"].add_argument("--checkpoint", help="checkpoint to evaluate (default: output_dir/model.mkm)")
    subs["freq-response"].add_argument("--checkpoint", help="MKM1 checkpoint of a raw-waveform model")
    subs["freq-response"].add_argument("--svg", action="store_true", help="also render an SVG plot")
    subs["make-synthetic"].add_argument("--kind", choices=("tones", "embeddings"), default="tones")
    subs["report"].add_argument("reports", nargs="+", help="report.json files or directories to search")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command][0](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
