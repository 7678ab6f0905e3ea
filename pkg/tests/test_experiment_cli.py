import csv
import json
import os

import numpy as np
import pytest

from marmofeat.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from marmofeat.errors import DataError, MissingEmbeddingError
from marmofeat.experiment import (ExperimentConfig, emit_results_table, format_table, load_config,
                                  run_experiment, write_config)
from marmofeat.nnet import TrainConfig
from marmofeat.synthetic import EmbeddingSetSpec, ToneSpec, make_synthetic_dataset, make_synthetic_embeddings


@pytest.fixture(scope="module")
def tones(tmp_path_factory):
    root = tmp_path_factory.mktemp("tones")
    return make_synthetic_dataset(ToneSpec(per_class=12), 0, root)


@pytest.fixture(scope="module")
def embeddings(tmp_path_factory):
    root = tmp_path_factory.mktemp("emb")
    return make_synthetic_embeddings(EmbeddingSetSpec(n_segments=60, dim=6), 0, root)


def write_ini(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_c22_report_has_chance(tones, tmp_path):
    cfg = ExperimentConfig(tones, "CTID", "C22", 44100, tmp_path, train=TrainConfig(max_epochs=10))
    report = run_experiment(cfg)
    assert report["chance"] == pytest.approx(100 / 3)
    assert 0 <= report["uar"] <= 100 and report["n_c"] == 3
    for name in ("report.json", "model.mkm", "history.csv", "split/split.json"):
        assert (tmp_path / name).is_file()


def test_reports_byte_identical(tones, tmp_path):
    texts = []
    for run in ("a", "b"):
        cfg = ExperimentConfig(tones, "CTID", "C22", 16000, tmp_path / run, seed=4, train=TrainConfig(max_epochs=3))
        run_experiment(cfg)
        texts.append((tmp_path / run / "report.json").read_bytes())
    assert texts[0] == texts[1]


def test_e2e_smoke(tones, tmp_path):
    cfg = ExperimentConfig(tones, "CTID", "E2E", 16000, tmp_path,
                           train=TrainConfig(max_epochs=1, early_stop_patience=20))
    report = run_experiment(cfg)
    assert report["epochs_run"] == 1 and report["feature"] == "E2E"


def test_wlm_missing_layer(embeddings, tmp_path):
    cfg = ExperimentConfig(embeddings, "CTID", "WLM", 16000, tmp_path, wlm_layer=3,
                           embedding_dir=embeddings.parent / "embeddings", train=TrainConfig(max_epochs=5))
    assert run_experiment(cfg)["uar"] > 100 / 3
    victim = next((embeddings.parent / "embeddings").glob("*.layer7.emb"))
    segment = victim.name.split(".layer")[0]
    os.rename(victim, victim.with_suffix(".bak"))
    try:
        with pytest.raises(MissingEmbeddingError, match=f"{segment}.*layer 7"):
            run_experiment(ExperimentConfig(**{**cfg.__dict__, "wlm_layer": 7}))
    finally:
        os.rename(victim.with_suffix(".bak"), victim)


def test_config_validation_and_round_trip(tones, tmp_path):
    with pytest.raises(DataError):
        ExperimentConfig(tones, "CTID", "WLM", 16000, tmp_path)
    with pytest.raises(DataError):
        ExperimentConfig(tones, "CTID", "XYZ", 16000, tmp_path)
    cfg = ExperimentConfig(tones, "CLID", "E2E", 44100, tmp_path / "o", seed=9,
                           train=TrainConfig(max_epochs=4, early_stop_patience=2, seed=9))
    write_config(cfg, tmp_path / "c.ini")
    back = load_config(tmp_path / "c.ini")
    assert back.train == cfg.train and back.task == "CLID" and back.seed == 9
    ini = write_ini(tmp_path / "d.ini", "[experiment]\ndataset_manifest = m.csv\ntask = CTID\nfeature = e2e\n")
    loaded = load_config(ini)
    assert loaded.train.max_epochs == 100 and loaded.train.early_stop_patience == 20
    assert loaded.dataset_manifest == tmp_path / "m.csv"


def test_results_table(tmp_path):
    base = {"dataset": "D1", "feature": "C22", "sample_rate": 16000, "task": "CTID", "uar": 40.0}
    one = emit_results_table([base], tmp_path)
    assert len(one) == 1 and one[0]["CTID_best"] and one[0]["SID"] is None
    table = emit_results_table([base, {**base, "feature": "E2E", "uar": 60.0}], tmp_path)
    assert [r["CTID_best"] for r in table] == [False, True]
    assert "60.00*" in format_table(table) and "N/A" in (tmp_path / "results.txt").read_text()
    with pytest.raises(DataError, match="conflicting"):
        emit_results_table([base, {**base, "uar": 41.0}], tmp_path)


def test_results_table_best_flags_match_max(tmp_path):
    rng = np.random.default_rng(0)
    reports = [{"dataset": d, "feature": f, "sample_rate": 16000, "task": t, "uar": float(rng.uniform(0, 100))}
               for d in ("D1", "D2") for f in ("C22", "WLM", "E2E") for t in ("CTID", "CLID")]
    table = emit_results_table(reports, tmp_path)
    for d in ("D1", "D2"):
        for t in ("CTID", "CLID"):
            best = max(r["uar"] for r in reports if r["dataset"] == d and r["task"] == t)
            flagged = [r[t] for r in table if r["dataset"] == d and r[f"{t}_best"]]
            assert flagged == [best]


def test_cli_pipeline(tones, tmp_path, capsys):
    cfg = write_ini(tmp_path / "exp.ini", f"""[experiment]
dataset_manifest = {tones}
task = CTID
feature = C22
sample_rate = 44100
seed = 1
output_dir = run

[train]
max_epochs = 5
""")
    assert main(["split", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "run" / "split" / "test.csv").is_file()
    assert main(["extract-features", "--config", str(cfg)]) == EXIT_OK
    with open(tmp_path / "run" / "features.csv") as fh:
        header = next(csv.reader(fh))
    assert header[0] == "segment_id" and len(header) == 1 + 24 + 24
    assert main(["train", "--config", str(cfg), "--seed", "2", "--output", str(tmp_path / "r2")]) == EXIT_OK
    assert main(["eval", "--config", str(cfg), "--seed", "2", "--output", str(tmp_path / "r2")]) == EXIT_OK
    report = json.loads((tmp_path / "r2" / "report.json").read_text())
    assert report["seed"] == 2
    assert main(["report", str(tmp_path / "r2"), "--output", str(tmp_path / "tab")]) == EXIT_OK
    assert "CTID" in capsys.readouterr().out


def test_cli_freq_response_and_probe(tones, embeddings, tmp_path):
    cfg = write_ini(tmp_path / "e2e.ini", f"""[experiment]
dataset_manifest = {tones}
task = CTID
feature = E2E
sample_rate = 16000
output_dir = run
[train]
max_epochs = 1
""")
    assert main(["train", "--config", str(cfg)]) == EXIT_OK
    assert main(["freq-response", "--checkpoint", str(tmp_path / "run" / "model.mkm")]) == EXIT_OK
    assert len((tmp_path / "run" / "freq_response.csv").read_text().splitlines()) == 1026
    probe = write_ini(tmp_path / "probe.ini", f"""[probe]
dataset_manifest = {embeddings}
embedding_dir = {embeddings.parent / 'embeddings'}
tasks = CTID, SID
max_epochs = 10
""")
    assert main(["probe-layers", "--config", str(probe), "--output", str(tmp_path / "probe")]) == EXIT_OK
    assert (tmp_path / "probe" / "layer_matrix.csv").is_file()


def test_cli_make_synthetic(tmp_path):
    ini = write_ini(tmp_path / "s.ini", "[synthetic]\nper_class = 4\nfrequencies_hz = 1000, 3000\n")
    assert main(["make-synthetic", "--config", str(ini), "--output", str(tmp_path / "s"), "--seed", "3"]) == EXIT_OK
    assert len((tmp_path / "s" / "manifest.csv").read_text().splitlines()) == 9
    assert main(["make-synthetic", "--kind", "embeddings", "--output", str(tmp_path / "e")]) == EXIT_OK


def test_cli_exit_codes(tmp_path):
    assert main(["nope"]) == EXIT_USAGE
    assert main(["train"]) == EXIT_DATA
    cfg = write_ini(tmp_path / "x.ini", "[experiment]\ndataset_manifest = missing.csv\ntask = CTID\nfeature = C22\n")
    assert main(["train", "--config", str(cfg)]) == EXIT_DATA
    bad = write_ini(tmp_path / "bad.ini", "[synthetic]\nper_class = 1\n")
    assert main(["make-synthetic", "--config", str(bad), "--output", str(tmp_path / "b")]) == EXIT_DATA
