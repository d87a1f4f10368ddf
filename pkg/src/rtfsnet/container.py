"""Binary named-tensor container.

Layout (all integers little-endian)::

    b"RTFS"                     magic
    u32 version                 == 1
    u32 count
    count x {
        u16 name_len, name (UTF-8)
        u8  dtype               0 = float32, 1 = uint8 (opaque byte blob)
        u8  rank
        rank x u32 dims
        payload                 row-major, prod(dims) elements
    }

The model config travels as a uint8 blob named ``__config__`` holding UTF-8 JSON.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"RTFS"
VERSION = 1
CONFIG_KEY = "__config__"

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_CODES = {np.dtype("<f4"): 0, np.dtype("u1"): 1}


def encode(tensors: dict) -> bytes:
    """Serialize ``name -> array`` in insertion order."""
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype == np.float64 or arr.dtype == np.float32:
            arr = arr.astype("<f4")
        code = _CODES.get(arr.dtype)
        if code is None:
            raise FormatError(f"unsupported dtype {arr.dtype}", tensor=name)
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF or arr.ndim > 0xFF:
            raise FormatError("name or rank too large", tensor=name)
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str, tensor=None) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", path=self.path, tensor=tensor)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk


def decode(buf: bytes, path=None) -> dict:
    """Parse a container; raises :class:`FormatError` without returning partial data."""
    r = _Reader(buf, path)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not a tensor container", path=path)
    version, count = struct.unpack("<II", r.take(8, "header"))
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}", path=path)
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", r.take(2, "name length"))
        try:
            name = r.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("tensor name is not UTF-8", path=path) from exc
        code, rank = struct.unpack("<BB", r.take(2, "dtype/rank", name))
        if code not in _DTYPES:
            raise FormatError(f"unknown dtype code {code}", path=path, tensor=name)
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank, "dims", name))
        dtype = _DTYPES[code]
        n = int(np.prod(dims, dtype=np.int64))
        payload = r.take(n * dtype.itemsize, "payload", name)
        if name in out:
            raise FormatError("duplicate tensor name", path=path, tensor=name)
        out[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after last tensor", path=path)
    return out


def write_container(path, tensors: dict) -> None:
    data = encode(tensors)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise FormatError(f"cannot write container: {exc}", path=path) from exc


def read_container(path) -> dict:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read container: {exc}", path=path) from exc
    return decode(buf, path)


def blob(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).copy()


def blob_text(arr: np.ndarray) -> str:
    return np.asarray(arr, dtype=np.uint8).tobytes().decode("utf-8")
