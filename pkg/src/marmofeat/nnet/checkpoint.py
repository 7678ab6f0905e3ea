"""MKM1 model checkpoints.

Layout, all integers little-endian::

    b"MKM1"
    u32 version (=1)
    u32 descriptor length, then that many bytes of UTF-8 JSON
        {"spec": {...}, "dtype": "float32"|"float64", "best_epoch": int|null,
         "history": [{"epoch", "train_loss", "val_uar", "lr"}, ...]}
    u32 tensor count, then per tensor:
        u16 name length, UTF-8 name
        u8 dtype code (0 = float32, 1 = float64)
        u8 ndim, ndim x u32 dims
        raw little-endian data, row-major

Parameter tensors are named ``layer<i>.weight`` / ``layer<i>.bias``; an input
standardiser, when present, is stored as ``input.mean`` / ``input.scale``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .models import Model, spec_from_dict, spec_to_dict

MAGIC = b"MKM1"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def _tensors(model: Model) -> list[tuple[str, np.ndarray]]:
    out = list(model.named_params().items())
    if model.input_mean is not None:
        out += [("input.mean", model.input_mean), ("input.scale", model.input_scale)]
    return out


def save_checkpoint(model: Model, path) -> None:
    desc = json.dumps({"spec": spec_to_dict(model.spec), "dtype": model.dtype.name,
                       "best_epoch": model.best_epoch, "history": model.history},
                      sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(desc)), desc]
    tensors = _tensors(model)
    parts.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        arr = np.ascontiguousarray(arr)
        code = _CODES[arr.dtype]
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", code, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(_DTYPES[code], copy=False).tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"{self.path}: truncated checkpoint at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path) -> Model:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(data, path)
    if r.take(4) != MAGIC:
        raise CheckpointError(f"{path}: not an MKM1 checkpoint")
    version, desc_len = r.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        desc = json.loads(r.take(desc_len).decode("utf-8"))
        model = Model(spec_from_dict(desc["spec"]), np.dtype(desc["dtype"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: bad descriptor: {exc}") from exc
    model.best_epoch = desc.get("best_epoch")
    model.history = desc.get("history", [])

    (count,) = r.unpack("<I")
    tensors = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise CheckpointError(f"{path}: tensor {name} has unknown dtype code {code}")
        shape = r.unpack(f"<{ndim}I")
        dt = _DTYPES[code]
        n = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(r.take(n * dt.itemsize), dtype=dt).reshape(shape)
    if r.pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - r.pos} trailing bytes")

    mean, scale = tensors.pop("input.mean", None), tensors.pop("input.scale", None)
    if mean is not None:
        model.set_standardizer(mean, scale)
    try:
        model.load_params(tensors)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    return model
