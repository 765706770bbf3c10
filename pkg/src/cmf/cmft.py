"""CMFT binary tensor files.

Layout: ``b"CMFT"``, version byte 0x01, rank byte, ``rank`` little-endian
uint32 dims, then ``prod(dims)`` little-endian float32 values in row-major
order.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"CMFT"
VERSION = 1
MAX_RANK = 5


class CMFTError(ValueError):
    pass


def encode(a) -> bytes:
    arr = np.ascontiguousarray(a, dtype="<f4")
    if not 1 <= arr.ndim <= MAX_RANK:
        raise CMFTError(f"rank {arr.ndim} outside 1..{MAX_RANK}")
    if min(arr.shape) < 1:
        raise CMFTError(f"dims must be positive, got {list(arr.shape)}")
    header = MAGIC + bytes([VERSION, arr.ndim]) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def decode(buf: bytes) -> np.ndarray:
    if len(buf) < 6 or buf[:4] != MAGIC:
        raise CMFTError("missing CMFT magic")
    if buf[4] != VERSION:
        raise CMFTError(f"unsupported CMFT version {buf[4]}")
    rank = buf[5]
    if not 1 <= rank <= MAX_RANK:
        raise CMFTError(f"rank {rank} outside 1..{MAX_RANK}")
    end = 6 + 4 * rank
    if len(buf) < end:
        raise CMFTError("truncated header")
    dims = struct.unpack(f"<{rank}I", buf[6:end])
    if min(dims) < 1:
        raise CMFTError(f"dims must be positive, got {list(dims)}")
    count = int(np.prod(dims, dtype=np.int64))
    if len(buf) != end + 4 * count:
        raise CMFTError(f"payload has {len(buf) - end} bytes, dims {list(dims)} need {4 * count}")
    return np.frombuffer(buf, dtype="<f4", count=count, offset=end).astype(np.float32).reshape(dims)


def write(path, a) -> None:
    data = encode(a)
    with open(os.fspath(path), "wb") as f:
        f.write(data)


def read(path) -> np.ndarray:
    with open(os.fspath(path), "rb") as f:
        return decode(f.read())
