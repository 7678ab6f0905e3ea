"""Diagnostics: cumulative frequency response of first-layer filters and layer-probe matrices."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

N_DFT = 2048


@dataclass(frozen=True)
class FilterBank:
    filters: np.ndarray  # (n_f, taps)
    sample_rate: int


@dataclass(frozen=True)
class CumulativeResponse:
    magnitude: np.ndarray
    freq_axis: np.ndarray


@dataclass(frozen=True)
class LayerMatrix:
    raw_uar: np.ndarray  # (tasks, layers)
    normalized: np.ndarray
    tasks: tuple[str, ...] = ()
    constant_rows: tuple[bool, ...] = ()


def filter_response(taps, n_dft: int = N_DFT) -> np.ndarray:
    """One-sided DFT magnitude of zero-padded taps (n_dft // 2 + 1 points)."""
    taps = np.asarray(taps, dtype=np.float64)
    if taps.ndim != 1 or taps.size == 0:
        raise ValueError("empty filter")
    if taps.size > n_dft:
        raise ValueError(f"filter of {taps.size} taps exceeds the {n_dft}-point DFT")
    return np.abs(np.fft.rfft(taps, n_dft))


def filter_bank_from_model(model) -> FilterBank:
    """First-layer filters of a raw-waveform model, one row per filter."""
    w = model.layers[0].weight
    return FilterBank(np.asarray(w[:, 0, :], dtype=np.float64), model.spec.sample_rate)


def cumulative_response(bank: FilterBank, n_dft: int = N_DFT) -> CumulativeResponse:
    """Sum over filters of the magnitude spectrum divided by its L2 norm."""
    filters = np.atleast_2d(np.asarray(bank.filters, dtype=np.float64))
    total = np.zeros(n_dft // 2 + 1)
    for k, taps in enumerate(filters):
        mag = filter_response(taps, n_dft)
        norm = np.linalg.norm(mag)
        if norm == 0.0:
            raise ValueError(f"filter {k} has zero energy")
        total += mag / norm
    freq = np.arange(total.size) * (bank.sample_rate / n_dft)
    return CumulativeResponse(total, freq)


def band_mean(resp: CumulativeResponse, center_hz: float, half_width_hz: float = 500.0) -> float:
    sel = np.abs(resp.freq_axis - center_hz) <= half_width_hz
    if not sel.any():
        raise ValueError(f"no bins within {half_width_hz} Hz of {center_hz} Hz")
    return float(resp.magnitude[sel].mean())


def normalize_layer_matrix(raw_uar, tasks=()) -> LayerMatrix:
    """Min-max scale each task row to [0, 1]; constant rows become zeros and are flagged."""
    raw = np.atleast_2d(np.asarray(raw_uar, dtype=np.float64))
    if raw.shape[1] < 2:
        raise ValueError("need at least 2 layers per task row")
    lo = raw.min(axis=1, keepdims=True)
    span = raw.max(axis=1, keepdims=True) - lo
    constant = span[:, 0] == 0
    norm = np.zeros_like(raw)
    ok = ~constant
    # (max - min) / (max - min) is exactly 1 in IEEE arithmetic, so the extremes land on 0 and 1
    norm[ok] = (raw[ok] - lo[ok]) / span[ok]
    return LayerMatrix(raw, norm, tuple(tasks), tuple(bool(c) for c in constant))


def _fmt(v: float) -> str:
    return repr(float(v))


def export_plot_data(result, path, svg: bool = False) -> list[Path]:
    """Write plot data as CSV, plus an SVG if requested and matplotlib is importable."""
    path = Path(path)
    written = [path]
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write plot data to {path}: {exc}") from exc
    with fh:
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(result, CumulativeResponse):
            w.writerow(["freq_hz", "magnitude"])
            for f, m in zip(result.freq_axis, result.magnitude):
                w.writerow([_fmt(f), _fmt(m)])
        elif isinstance(result, LayerMatrix):
            n_layers = result.raw_uar.shape[1]
            w.writerow(["task", "kind"] + [f"layer{k}" for k in range(n_layers)])
            tasks = result.tasks or tuple(f"task{i}" for i in range(result.raw_uar.shape[0]))
            for name, raw, norm in zip(tasks, result.raw_uar, result.normalized):
                w.writerow([name, "raw"] + [_fmt(v) for v in raw])
                w.writerow([name, "normalized"] + [_fmt(v) for v in norm])
        else:
            raise TypeError(f"cannot export {type(result).__name__}")
    if svg:
        svg_path = _write_svg(result, path.with_suffix(".svg"))
        if svg_path is not None:
            written.append(svg_path)
    return written


def _write_svg(result, path: Path) -> Path | None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        log.warning("matplotlib not installed; skipping %s", path)
        return None
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if isinstance(result, CumulativeResponse):
        ax.plot(result.freq_axis / 1000.0, result.magnitude, lw=1)
        ax.set_xlabel("frequency (kHz)")
        ax.set_ylabel("cumulative response")
    else:
        im = ax.imshow(result.normalized, aspect="auto", cmap="viridis", vmin=0, vmax=1)
        ax.set_xlabel("layer")
        ax.set_yticks(range(len(result.tasks)), result.tasks)
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
