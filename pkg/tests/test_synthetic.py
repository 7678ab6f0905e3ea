from collections import Counter

import numpy as np
import pytest

from marmofeat.audio_io import read_wav
from marmofeat.embeddings import N_LAYERS, embedding_path, load_embeddings
from marmofeat.manifest import load_manifest
from marmofeat.synthetic import (EmbeddingSetSpec, ToneSpec, make_synthetic_dataset, make_synthetic_embeddings,
                                 make_tone)


def test_tone_dataset_counts_and_tones(tmp_path):
    spec = ToneSpec(per_class=20)
    m = load_manifest(make_synthetic_dataset(spec, 3, tmp_path))
    assert len(m) == 60
    assert Counter(r.call_type for r in m) == {"tone4000": 20, "tone8000": 20, "tone12000": 20}
    for rec in m.records[:9]:
        w = read_wav(m.resolve(rec))
        assert w.sample_rate == 44100 and 0.04 <= w.duration <= 0.08
        mag = np.abs(np.fft.rfft(w.samples))
        expected = int(rec.call_type[4:]) * len(w) / 44100
        assert abs(np.argmax(mag) - expected) <= 1


def test_snr():
    x = make_tone(1000.0, 44100, ToneSpec(), np.random.default_rng(0))
    t = np.arange(44100) / 44100
    basis = np.c_[np.sin(2 * np.pi * 1000 * t), np.cos(2 * np.pi * 1000 * t)]
    fitted = basis @ np.linalg.lstsq(basis, x, rcond=None)[0]
    snr = 10 * np.log10(np.mean(fitted ** 2) / np.mean((x - fitted) ** 2))
    assert snr == pytest.approx(10.0, abs=0.2)


def test_same_seed_same_bytes(tmp_path):
    spec = ToneSpec(per_class=3)
    make_synthetic_dataset(spec, 5, tmp_path / "a")
    make_synthetic_dataset(spec, 5, tmp_path / "b")
    files = sorted((tmp_path / "a" / "wav").iterdir())
    assert files and all(f.read_bytes() == (tmp_path / "b" / "wav" / f.name).read_bytes() for f in files)


@pytest.mark.parametrize("bad", [dict(frequencies_hz=(4000.0,)), dict(frequencies_hz=(4000.0, 4000.0)),
                                 dict(frequencies_hz=(4000.0, 30000.0)), dict(per_class=2)])
def test_invalid_specs(tmp_path, bad):
    with pytest.raises(ValueError):
        make_synthetic_dataset(ToneSpec(**bad), 0, tmp_path)


def test_embedding_set_layout(tmp_path):
    spec = EmbeddingSetSpec(n_segments=12, dim=6)
    m = load_manifest(make_synthetic_embeddings(spec, 0, tmp_path))
    assert len(m) == 12
    for rec in m.records[:2]:
        for layer in range(N_LAYERS):
            e = load_embeddings(embedding_path(tmp_path / "embeddings", rec.segment_id, layer))
            assert e.dim == 6 and spec.min_frames <= e.n_frames <= spec.max_frames
