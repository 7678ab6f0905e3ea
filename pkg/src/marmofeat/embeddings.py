"""Precomputed frame-level embeddings: EMB1 file IO and statistics pooling.

EMB1 layout::

    b"EMB1" | u32 LE n_frames | u32 LE dim | n_frames*dim float32 LE, row-major

Files are named ``<segment_id>.layer<k>.emb``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmbeddingFormatError, MissingEmbeddingError, TruncatedPayloadError

MAGIC = b"EMB1"
N_LAYERS = 13
_HEADER = struct.Struct("<4sII")


@dataclass(frozen=True)
class EmbeddingSequence:
    frames: np.ndarray
    layer_index: int | None = None

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class PooledEmbedding:
    vector: np.ndarray
    source_layer: int | None = None


def embedding_path(root, segment_id: str, layer: int) -> Path:
    return Path(root) / f"{segment_id}.layer{layer}.emb"


def write_embeddings(path, frames) -> None:
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise EmbeddingFormatError(f"embedding matrix must be N x D with N, D >= 1, got {frames.shape}")
    payload = np.ascontiguousarray(frames, dtype="<f4").tobytes()
    Path(path).write_bytes(_HEADER.pack(MAGIC, frames.shape[0], frames.shape[1]) + payload)


def load_embeddings(path, layer_index: int | None = None) -> EmbeddingSequence:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than the EMB1 header")
    magic, n, d = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
    if n < 1 or d < 1:
        raise EmbeddingFormatError(f"{path}: empty embedding ({n} x {d})")
    expected = _HEADER.size + 4 * n * d
    if len(data) < expected:
        raise TruncatedPayloadError(f"{path}: payload has {len(data) - _HEADER.size} bytes, header implies {4 * n * d}")
    if len(data) > expected:
        raise EmbeddingFormatError(f"{path}: {len(data) - expected} trailing bytes")
    frames = np.frombuffer(data, dtype="<f4", count=n * d, offset=_HEADER.size).reshape(n, d)
    if not np.all(np.isfinite(frames)):
        raise EmbeddingFormatError(f"{path}: non-finite values")
    return EmbeddingSequence(frames.astype(np.float32), layer_index)


def pool_stats(e: EmbeddingSequence) -> PooledEmbedding:
    """Concatenate per-dimension mean and population std over frames."""
    x = np.asarray(e.frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise EmbeddingFormatError("cannot pool an empty embedding sequence")
    mu = x.mean(axis=0)
    sd = np.sqrt(np.mean((x - mu) ** 2, axis=0))
    return PooledEmbedding(np.concatenate([mu, sd]), e.layer_index)


def load_pooled_layer(root, segment_ids, layer: int) -> np.ndarray:
    """Pooled (n_segments, 2D) matrix for one layer; any missing file is an error."""
    rows, dim = [], None
    for sid in segment_ids:
        path = embedding_path(root, sid, layer)
        if not path.is_file():
            raise MissingEmbeddingError(sid, layer, path)
        seq = load_embeddings(path, layer)
        if dim is None:
            dim = seq.dim
        elif seq.dim != dim:
            raise EmbeddingFormatError(f"{path}: dim {seq.dim} differs from {dim} in the same layer")
        rows.append(pool_stats(seq).vector)
    return np.vstack(rows)
