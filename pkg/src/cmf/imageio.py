"""Binary PGM (P5) and PPM (P6) images via Pillow.

Images are handled as float32 arrays in [0, 1]: PPM as [3, H, W], PGM as
[H, W]. Indexed instance maps are read and written as raw uint8 labels.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image


def _to_u8(a) -> np.ndarray:
    return np.clip(np.rint(np.asarray(a, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, rgb) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[0] != 3:
        raise ValueError(f"PPM needs [3, H, W], got {list(rgb.shape)}")
    Image.fromarray(np.ascontiguousarray(np.moveaxis(_to_u8(rgb), 0, -1)), "RGB").save(os.fspath(path), format="PPM")


def write_pgm(path, gray) -> None:
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ValueError(f"PGM needs [H, W], got {list(gray.shape)}")
    Image.fromarray(_to_u8(gray), "L").save(os.fspath(path), format="PPM")


def write_labels(path, labels) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"label map needs [H, W], got {list(labels.shape)}")
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("label ids must fit in 0..255")
    Image.fromarray(labels.astype(np.uint8), "L").save(os.fspath(path), format="PPM")


def _open(path, magic: bytes) -> Image.Image:
    with open(os.fspath(path), "rb") as f:
        head = f.read(2)
    if head != magic:
        raise ValueError(f"{path}: expected a binary {magic.decode()} file, found {head!r}")
    return Image.open(os.fspath(path))


def read_ppm(path) -> np.ndarray:
    with _open(path, b"P6") as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return np.ascontiguousarray(np.moveaxis(arr, -1, 0) / np.float32(255.0))


def read_pgm(path) -> np.ndarray:
    with _open(path, b"P5") as im:
        return np.asarray(im, dtype=np.float32) / np.float32(255.0)


def read_labels(path) -> np.ndarray:
    with _open(path, b"P5") as im:
        return np.asarray(im, dtype=np.int64)


def read_image(path) -> np.ndarray:
    """Either format as [C, H, W] float32."""
    with open(os.fspath(path), "rb") as f:
        head = f.read(2)
    if head == b"P6":
        return read_ppm(path)
    if head == b"P5":
        return read_pgm(path)[None]
    raise ValueError(f"{path}: not a binary PGM/PPM file")


def normalized(a, lo: float, hi: float) -> np.ndarray:
    """Map [lo, hi] to [0, 1] for 8-bit visualization."""
    if not hi > lo:
        return np.zeros_like(np.asarray(a, dtype=np.float32))
    return np.clip((np.asarray(a, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)
