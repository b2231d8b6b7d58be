"""Flat binary tensor files (``.xlf``).

Single-tensor layout, used for per-utterance features and CLI dumps:

    bytes 0..3   magic ``XLF1`` (ASCII)
    u32 LE       rank
    u32 LE * r   dims
    f64 LE       values, row-major

Multi-tensor container, used for model weights (one named section per
parameter): magic ``XLF1``, then u32 LE section count, then per section a
u32 LE name length, the UTF-8 name, and the rank/dims/values block above.
Sections are written sorted by name so identical tensors always produce
identical bytes.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ParseError

MAGIC = b"XLF1"


def write_tensor(path, values) -> None:
    arr = np.asarray(values, dtype=np.float64, order="C")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype("<f8").tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    arr, offset = _parse_tensor(data, 4, path)
    if data[:4] != MAGIC:
        raise ParseError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", path=path)
    if offset != len(data):
        raise ParseError(f"{len(data) - offset} trailing bytes", path=path)
    return arr


def write_sections(path, tensors: dict) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype=np.float64, order="C")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f8").tobytes())


def read_sections(path) -> dict:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ParseError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", path=path)
    (count,) = struct.unpack_from("<I", data, 4)
    offset = 8
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        tensors[name], offset = _parse_tensor(data, offset, path)
    if offset != len(data):
        raise ParseError(f"{len(data) - offset} trailing bytes", path=path)
    return tensors


def _parse_tensor(data: bytes, offset: int, path) -> tuple[np.ndarray, int]:
    try:
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        end = offset + 8 * n
        if end > len(data):
            raise struct.error("tensor data truncated")
        arr = np.frombuffer(data[offset:end], dtype="<f8").reshape(dims)
    except struct.error as exc:
        raise ParseError(str(exc), path=path) from exc
    return arr.astype(np.float64), end
