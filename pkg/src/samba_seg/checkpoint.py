"""Binary checkpoint files.

Layout (all integers little-endian)::

    b"SMBA"                      magic
    u32 version                  currently 1
    u32 n, n bytes               configuration text (UTF-8)
    u32 count                    number of tensors
    count x {
        u32 n, n bytes           tensor name (UTF-8)
        u32 rank
        rank x u64               dims
        u32 dtype                0 = float32, 1 = float64
        raw little-endian data
    }
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"SMBA"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


@dataclass
class Checkpoint:
    version: int
    config_text: str
    tensors: dict[str, np.ndarray]


def _blob(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode_checkpoint(tensors: dict[str, np.ndarray], config_text: str = "") -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), _blob(config_text), struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype not in DTYPE_CODES:
            raise CheckpointError(f"{name}: unsupported dtype {arr.dtype}")
        code = DTYPE_CODES[arr.dtype]
        parts.append(_blob(name))
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(struct.pack("<I", code))
        parts.append(np.ascontiguousarray(arr, dtype=DTYPES[code]).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"truncated checkpoint: need {n} bytes at offset {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"bad UTF-8 in checkpoint: {exc}") from None


def decode_checkpoint(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    config_text = r.text()
    tensors = {}
    for _ in range(r.u32()):
        name = r.text()
        rank = r.u32()
        dims = struct.unpack(f"<{rank}Q", r.take(8 * rank))
        code = r.u32()
        if code not in DTYPES:
            raise CheckpointError(f"{name}: unknown dtype code {code}")
        dtype = DTYPES[code]
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        data = np.frombuffer(r.take(count * dtype.itemsize), dtype=dtype).reshape(dims)
        tensors[name] = data.astype(dtype.newbyteorder("="), copy=True)
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after last tensor")
    return Checkpoint(version, config_text, tensors)


def save_checkpoint(path, model, config_text: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_checkpoint(model.state_dict(), config_text))
    tmp.replace(path)
    return path


def load_checkpoint(path) -> Checkpoint:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return decode_checkpoint(buf)
