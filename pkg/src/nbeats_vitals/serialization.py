"""Versioned little-endian weight files.

Byte layout (all integers little-endian, unsigned)::

    magic      4 bytes   b"NBVW"
    version    u16       currently 1
    hdr_len    u32       length of the JSON header in bytes
    header     hdr_len   UTF-8 JSON, sorted keys: {"model": ModelConfig}
    n_tensors  u32
    n_tensors times:
        name_len u16, name (UTF-8)
        rows u32, cols u32       vectors are stored as (n, 1)
        nbytes u64               must equal rows * cols * 8
        data                     float64 little-endian, row-major

Nothing may follow the last tensor.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .nbeats import ModelConfig, NBeatsModel, build_model

MAGIC = b"NBVW"
FORMAT_VERSION = 1


class ModelFileError(ValueError):
    pass


class ModelVersionError(ModelFileError):
    """Unknown magic bytes or unsupported format version."""


class ModelTruncatedError(ModelFileError):
    pass


class ModelCorruptError(ModelFileError):
    """Sizes or shapes in the file are inconsistent."""


def model_to_bytes(model: NBeatsModel) -> bytes:
    header = json.dumps({"model": model.config.to_dict()}, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(header)), header]
    named = model.named_params()
    parts.append(struct.pack("<I", len(named)))
    for name, arr in named:
        a = np.ascontiguousarray(arr, dtype="<f8")
        rows, cols = (a.shape[0], 1) if a.ndim == 1 else a.shape
        enc = name.encode()
        parts.append(struct.pack("<H", len(enc)) + enc)
        parts.append(struct.pack("<IIQ", rows, cols, a.nbytes))
        parts.append(a.tobytes())
    return b"".join(parts)


def save_model(model: NBeatsModel, path) -> Path:
    path = Path(path)
    path.write_bytes(model_to_bytes(model))
    return path


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise ModelTruncatedError(
                f"file ends while reading {what} (need {n} bytes at offset {self.pos}, "
                f"{len(self.buf) - self.pos} left)"
            )
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def model_from_bytes(buf: bytes) -> NBeatsModel:
    r = _Reader(buf)
    if len(buf) < len(MAGIC) or buf[:len(MAGIC)] != MAGIC:
        raise ModelVersionError("not a model file (bad magic bytes)")
    r.pos = len(MAGIC)
    version, hdr_len = r.unpack("<HI", "header")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported format version {version}")
    try:
        header = json.loads(r.take(hdr_len, "header").decode())
        config = ModelConfig(**header["model"])
    except ModelFileError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelCorruptError(f"unreadable header: {exc}") from exc

    model = build_model(config, zero=True)
    expected = model.named_params()
    (count,) = r.unpack("<I", "tensor count")
    if count != len(expected):
        raise ModelCorruptError(f"file has {count} tensors, configuration implies {len(expected)}")
    for name, target in expected:
        (name_len,) = r.unpack("<H", "tensor name")
        got_name = r.take(name_len, "tensor name").decode(errors="replace")
        rows, cols, nbytes = r.unpack("<IIQ", f"shape of {got_name}")
        if nbytes != rows * cols * 8:
            raise ModelCorruptError(
                f"{got_name}: declared {nbytes} bytes but shape {rows}x{cols} needs {rows * cols * 8}"
            )
        want = (target.shape[0], 1) if target.ndim == 1 else target.shape
        if got_name != name or (rows, cols) != want:
            raise ModelCorruptError(f"expected {name} {want}, found {got_name} {(rows, cols)}")
        data = np.frombuffer(r.take(nbytes, got_name), dtype="<f8")
        target[...] = data.reshape(target.shape)
    if r.pos != len(buf):
        raise ModelCorruptError(f"{len(buf) - r.pos} unexpected trailing bytes")
    return model


def load_model(path) -> NBeatsModel:
    return model_from_bytes(Path(path).read_bytes())
