"""PD4ML-BIN v1: the on-disk container for named tensors.

Layout (all integers little-endian):

    magic  "PD4M" (4 bytes)
    u32    version = 1
    u32    tensor count
    per tensor:
        u16    name length, then that many UTF-8 name bytes
        u8     dtype: 1=f32, 2=f64, 3=i32, 4=u8
        u8     rank
        u64    extent, rank times
        raw row-major payload
    footer: 16-byte MD5 of every preceding byte

Round trips are bit-exact; any corruption (header, payload, or footer) fails
the footer digest or the structural parse and raises FormatError.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError

MAGIC = b"PD4M"
VERSION = 1

_DTYPE_TO_CODE = {
    np.dtype(np.float32): 1,
    np.dtype(np.float64): 2,
    np.dtype(np.int32): 3,
    np.dtype(np.uint8): 4,
}
_CODE_TO_DTYPE = {code: dt for dt, code in _DTYPE_TO_CODE.items()}


def codec_write(tensors: dict, path) -> None:
    """Write a name -> ndarray map; insertion order is preserved on read."""
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<II", VERSION, len(tensors))
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = _DTYPE_TO_CODE.get(arr.dtype)
        if code is None:
            raise ContractError(f"tensor {name!r}: dtype {arr.dtype} not storable")
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ContractError(f"tensor name too long ({len(name_bytes)} bytes)")
        payload += struct.pack("<H", len(name_bytes))
        payload += name_bytes
        payload += struct.pack("<BB", code, arr.ndim)
        payload += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        payload += np.ascontiguousarray(le).tobytes()
    digest = hashlib.md5(bytes(payload)).digest()
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(bytes(payload) + digest)
    tmp.replace(path)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError("truncated file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def codec_read(path) -> dict:
    """Read a container back into a name -> ndarray map."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 8 + 16:
        raise FormatError("truncated file")
    body, footer = blob[:-16], blob[-16:]
    if hashlib.md5(body).digest() != footer:
        raise FormatError("footer MD5 mismatch")
    r = _Reader(body)
    if r.take(4) != MAGIC:
        raise FormatError("bad magic")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    out: dict = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"tensor name not UTF-8: {exc}") from exc
        code, rank = r.unpack("<BB")
        dtype = _CODE_TO_DTYPE.get(code)
        if dtype is None:
            raise FormatError(f"unknown dtype code {code}")
        shape = r.unpack(f"<{rank}Q") if rank else ()
        n_items = 1
        for ext in shape:
            n_items *= ext
        raw = r.take(n_items * dtype.itemsize)
        arr = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype)
        out[name] = arr.reshape(shape)
    if r.pos != len(body):
        raise FormatError(f"{len(body) - r.pos} trailing bytes after last tensor")
    return out


def bytes_md5(data: bytes) -> str:
    return hashlib.md5(data).hexdigest()


def file_md5(path) -> str:
    h = hashlib.md5()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, entries: dict) -> None:
    """Plain-text sidecar: one ``key = value`` per line."""
    lines = [f"{k} = {v}\n" for k, v in entries.items()]
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"bad manifest line: {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out
