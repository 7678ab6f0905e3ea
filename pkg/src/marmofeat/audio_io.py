"""Waveform loading, resampling and segment slicing."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import AudioError, UnsupportedEncodingError

PCM16_SCALE = 32768.0


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono samples in [-1, 1] plus their sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"waveform must be 1-D, got shape {samples.shape}")
        if int(self.sample_rate) <= 0:
            raise AudioError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def __eq__(self, other) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(self.samples, other.samples)


@dataclass(frozen=True)
class ResampleSpec:
    """Target rate and anti-aliasing filter shape.

    ``filter_taps`` counts taps per polyphase branch measured at the lower of
    the two rates, so the transition band keeps the same width relative to
    the target Nyquist whatever the decimation factor.
    """

    target_rate: int
    filter_taps: int = 64
    cutoff_fraction: float = 0.9
    kaiser_beta: float = 8.6


def read_wav(path: str | Path) -> Waveform:
    """Read a PCM16 or float32 RIFF WAV file as a mono Waveform.

    Multichannel files keep channel 0 only (with a warning).
    """
    path = Path(path)
    if not path.is_file():
        raise AudioError(f"no such audio file: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except (ValueError, EOFError, OSError) as exc:
        raise AudioError(f"cannot read WAV {path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported sample format {data.dtype} (need PCM 16-bit or float 32-bit)")

    if samples.ndim == 2:
        if samples.shape[1] > 1:
            warnings.warn(f"{path}: {samples.shape[1]} channels, keeping channel 0", stacklevel=2)
        samples = samples[:, 0]
    if samples.size == 0:
        raise AudioError(f"{path}: zero-length audio")
    if not np.all(np.isfinite(samples)):
        raise AudioError(f"{path}: non-finite samples")
    return Waveform(samples, int(rate))


def write_wav(path: str | Path, w: Waveform, encoding: str = "pcm16") -> None:
    path = Path(path)
    if encoding == "pcm16":
        scaled = np.clip(np.round(w.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    elif encoding == "float32":
        scaled = w.samples.astype(np.float32)
    else:
        raise UnsupportedEncodingError(f"unknown encoding {encoding!r}")
    wavfile.write(path, w.sample_rate, scaled)


def _phase_table(up: int, down: int, spec: ResampleSpec) -> tuple[np.ndarray, np.ndarray]:
    """Windowed-sinc weights for every output phase.

    Returns (offsets, table) where output sample n with source position
    n*down/up uses inputs floor(n*down/up) + offsets weighted by table[phase].
    """
    source_rate_units = down / up  # source samples per output sample
    # Cutoff in cycles per source sample.
    nu = spec.cutoff_fraction * 0.5 / max(source_rate_units, 1.0)
    half_width = 0.5 * spec.filter_taps * max(source_rate_units, 1.0)
    k0 = int(math.floor(half_width)) + 1
    offsets = np.arange(-k0 + 1, k0 + 1)
    frac = np.arange(up)[:, None] * down % up / up
    t = offsets[None, :] - frac
    table = 2.0 * nu * np.sinc(2.0 * nu * t)
    inside = np.abs(t) <= half_width
    window = np.zeros_like(t)
    window[inside] = np.i0(spec.kaiser_beta * np.sqrt(1.0 - (t[inside] / half_width) ** 2))
    window /= np.i0(spec.kaiser_beta)
    table *= window
    table /= table.sum(axis=1, keepdims=True)
    return offsets, table


def resample(w: Waveform, spec: ResampleSpec, chunk: int = 1 << 15) -> Waveform:
    """Downsample with a Kaiser-windowed sinc polyphase filter.

    Resampling to the source rate returns an exact copy. Upsampling is not
    supported.
    """
    target = int(spec.target_rate)
    if target <= 0:
        raise AudioError(f"target rate must be positive, got {target}")
    if target > w.sample_rate:
        raise AudioError(f"upsampling {w.sample_rate} -> {target} Hz is not supported")
    if target == w.sample_rate:
        return Waveform(w.samples.copy(), w.sample_rate)
    if len(w) < 2:
        raise AudioError("cannot resample a waveform shorter than 2 samples")

    g = math.gcd(target, w.sample_rate)
    up, down = target // g, w.sample_rate // g
    offsets, table = _phase_table(up, down, spec)
    n_out = max(1, int(round(len(w) * up / down)))

    pad = offsets.max() + 1
    x = np.concatenate([np.zeros(pad), w.samples, np.zeros(pad + offsets.max() + 1)])
    out = np.empty(n_out)
    for start in range(0, n_out, chunk):
        n = np.arange(start, min(start + chunk, n_out), dtype=np.int64)
        base = n * down // up
        phase = n * down % up
        idx = base[:, None] + offsets[None, :] + pad
        out[start:start + n.size] = np.einsum("ij,ij->i", x[idx], table[phase])
    return Waveform(out, target)


def slice_segment(w: Waveform, start_s: float, end_s: float) -> Waveform:
    """Cut [start_s, end_s) out of ``w``; length is round(duration * rate)."""
    if not (start_s < end_s):
        raise AudioError(f"inverted interval [{start_s}, {end_s}]")
    # Float slack so a manifest end time equal to the file duration is accepted.
    tol = 0.5 / w.sample_rate
    if start_s < 0 or end_s > w.duration + tol:
        raise AudioError(f"interval [{start_s}, {end_s}] outside waveform of {w.duration:.6f} s")
    first = int(round(start_s * w.sample_rate))
    count = int(round((end_s - start_s) * w.sample_rate))
    first = min(first, len(w) - count) if count <= len(w) else 0
    if count <= 0 or first < 0 or first + count > len(w):
        raise AudioError(f"interval [{start_s}, {end_s}] yields no samples")
    return Waveform(w.samples[first:first + count].copy(), w.sample_rate)
