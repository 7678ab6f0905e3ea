"""Seeded synthetic datasets: noisy pure-tone "calls" and layer-indexed embedding sets."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import Waveform, write_wav
from .embeddings import N_LAYERS, embedding_path, write_embeddings
from .manifest import Manifest, SegmentRecord, write_manifest


@dataclass(frozen=True)
class ToneSpec:
    """Each class is a sine at its own frequency plus white noise at ``snr_db``."""

    frequencies_hz: tuple[float, ...] = (4000.0, 8000.0, 12000.0)
    per_class: int = 200
    snr_db: float = 10.0
    sample_rate: int = 44100
    min_duration_s: float = 0.04
    max_duration_s: float = 0.08
    amplitude: float = 0.25

    def validate(self) -> None:
        if len(self.frequencies_hz) < 2:
            raise ValueError("need at least 2 classes")
        if len(set(self.frequencies_hz)) != len(self.frequencies_hz):
            raise ValueError("class frequencies must be distinct")
        if any(f <= 0 or f >= self.sample_rate / 2 for f in self.frequencies_hz):
            raise ValueError(f"tone frequencies must lie in (0, {self.sample_rate / 2}) Hz")
        if self.per_class < 3:
            raise ValueError("need at least 3 segments per class")
        if not 0 < self.min_duration_s <= self.max_duration_s:
            raise ValueError("invalid duration range")
        if not 0 < self.amplitude < 1:
            raise ValueError("amplitude must be in (0, 1)")


def class_name(freq_hz: float) -> str:
    return f"tone{int(round(freq_hz))}"


def make_tone(freq_hz: float, n: int, spec: ToneSpec, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / spec.sample_rate
    tone = spec.amplitude * np.sin(2 * np.pi * freq_hz * t + rng.uniform(0, 2 * np.pi))
    noise_power = (spec.amplitude ** 2 / 2) / 10 ** (spec.snr_db / 10)
    return tone + rng.normal(0.0, np.sqrt(noise_power), n)


def make_synthetic_dataset(spec: ToneSpec, seed: int, out_dir) -> Path:
    """Write one PCM16 WAV per segment and a manifest; returns the manifest path.

    Segments are interleaved across classes. Caller and sex labels are left
    empty: they carry no signal in a tone set.
    """
    spec.validate()
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(spec.per_class):
        for freq in spec.frequencies_hz:
            sid = f"{class_name(freq)}_{i:04d}"
            dur = rng.uniform(spec.min_duration_s, spec.max_duration_s)
            n = int(round(dur * spec.sample_rate))
            samples = np.clip(make_tone(freq, n, spec, rng), -1.0, 32767 / 32768)
            write_wav(out_dir / "wav" / f"{sid}.wav", Waveform(samples, spec.sample_rate))
            records.append(SegmentRecord(sid, f"wav/{sid}.wav", 0.0, n / spec.sample_rate,
                                         call_type=class_name(freq)))
    manifest = Manifest(tuple(records), "synthetic_tones", spec.sample_rate, out_dir)
    path = out_dir / "manifest.csv"
    write_manifest(manifest, path)
    return path


@dataclass(frozen=True)
class EmbeddingSetSpec:
    """Per-layer embeddings where only ``separable_layer`` carries label information."""

    n_segments: int = 240
    dim: int = 16
    min_frames: int = 5
    max_frames: int = 20
    separable_layer: int = 3
    n_call_types: int = 3
    n_callers: int = 4
    class_offset: float = 3.0


def make_synthetic_embeddings(spec: EmbeddingSetSpec, seed: int, out_dir) -> Path:
    """Write a label-only manifest plus 13 EMB1 files per segment.

    On the separable layer, the call type, caller and sex each shift their
    own block of dimensions by a class-specific offset. Every other layer is
    pure Gaussian noise.
    """
    if spec.dim < 3:
        raise ValueError("dim must be at least 3")
    out_dir = Path(out_dir)
    emb_dir = out_dir / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    blocks = np.array_split(np.arange(spec.dim), 3)
    records = []
    for i in range(spec.n_segments):
        ct = i % spec.n_call_types
        caller = rng.integers(spec.n_callers)
        sex = caller % 2
        sid = f"seg{i:05d}"
        records.append(SegmentRecord(sid, "", 0.0, 0.1, call_type=f"ct{ct}",
                                     caller_id=f"caller{caller}", sex="fm"[sex]))
        n_frames = int(rng.integers(spec.min_frames, spec.max_frames + 1))
        for layer in range(N_LAYERS):
            frames = rng.normal(size=(n_frames, spec.dim))
            if layer == spec.separable_layer:
                for block, label, n_labels in zip(blocks, (ct, caller, sex),
                                                  (spec.n_call_types, spec.n_callers, 2)):
                    frames[:, block] += spec.class_offset * _label_code(label, n_labels, block.size)
            write_embeddings(embedding_path(emb_dir, sid, layer), frames)
    manifest = Manifest(tuple(records), "synthetic_embeddings", None, out_dir)
    path = out_dir / "manifest.csv"
    write_manifest(manifest, path)
    return path


def _label_code(label: int, n_labels: int, width: int) -> np.ndarray:
    """Distinct unit-scale pattern per label over ``width`` dims (points on a circle)."""
    angle = 2 * np.pi * label / n_labels
    code = np.zeros(width)
    code[0] = np.cos(angle)
    code[1 % width] += np.sin(angle)
    return code
