"""Built-in fixed feature extractor.

A stand-in for a learned backbone: the image is low-pass filtered and
subsampled to 1/4 resolution, then every pixel's 3x3 color neighborhood and
color gradients are mixed into ``channels`` outputs by a seeded random
projection. Coarser maps at 1/8 and 1/16 come from further [1, 2, 1]
smoothing and stride-2 subsampling.

Sampling is at integer multiples of the stride, so a feature pixel ``u`` sits
exactly on image pixel ``stride * u`` and intrinsics scale by the plain
resolution ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Intrinsics
from .tensor import as_tensor

STRIDE = 4
DEFAULT_CHANNELS = 64
_TRIANGLE = np.array([1, 2, 3, 4, 3, 2, 1], dtype=np.float64) / 16.0
_BINOMIAL = np.array([1, 2, 1], dtype=np.float64) / 4.0


def _filter_axis(a: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    r = len(taps) // 2
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    p = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    out = np.zeros_like(a, dtype=np.float64)
    for i, t in enumerate(taps):
        out += t * np.take(p, np.arange(i, i + n), axis=axis)
    return out


def smooth_subsample(img, taps, stride: int) -> np.ndarray:
    """Separable low-pass along H and W, then keep every ``stride``-th pixel."""
    a = np.asarray(img, dtype=np.float64)
    a = _filter_axis(_filter_axis(a, taps, -2), taps, -1)
    return a[..., ::stride, ::stride]


def _neighborhoods(a: np.ndarray) -> np.ndarray:
    c, h, w = a.shape
    p = np.pad(a, ((0, 0), (1, 1), (1, 1)), mode="edge")
    return np.stack([p[:, dy:dy + h, dx:dx + w] for dy in range(3) for dx in range(3)], axis=1).reshape(9 * c, h, w)


def _gradients(a: np.ndarray) -> np.ndarray:
    p = np.pad(a, ((0, 0), (1, 1), (1, 1)), mode="edge")
    gx = 0.5 * (p[:, 1:-1, 2:] - p[:, 1:-1, :-2])
    gy = 0.5 * (p[:, 2:, 1:-1] - p[:, :-2, 1:-1])
    return np.concatenate([gx, gy], axis=0)


def projection_matrix(in_dims: int, channels: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((channels, in_dims)) / np.sqrt(in_dims)


@dataclass
class FeaturePyramid:
    f1: np.ndarray  # [C, H/4, W/4]
    f2: np.ndarray  # [C, H/8, W/8]
    f3: np.ndarray  # [C, H/16, W/16]


def extract_features(image, channels: int = DEFAULT_CHANNELS, seed: int = 0) -> FeaturePyramid:
    """Image [C_img, H, W] in [0, 1] -> 1/4, 1/8 and 1/16 resolution feature maps."""
    img = as_tensor(image, 3, "image")
    q = smooth_subsample(img, _TRIANGLE, STRIDE)
    stack = np.concatenate([_neighborhoods(q), _gradients(q)], axis=0)
    proj = projection_matrix(stack.shape[0], channels, seed)
    c, h, w = stack.shape
    f1 = (proj @ stack.reshape(c, -1)).reshape(channels, h, w)
    f2 = smooth_subsample(f1, _BINOMIAL, 2)
    f3 = smooth_subsample(f2, _BINOMIAL, 2)
    return FeaturePyramid(f1.astype(np.float32), f2.astype(np.float32), f3.astype(np.float32))


def feature_intrinsics(k: Intrinsics, image_shape=None) -> Intrinsics:
    """Intrinsics of the 1/4 resolution map for an image of ``k``'s size."""
    h, w = image_shape if image_shape is not None else (k.height, k.width)
    return k.scaled(1.0 / STRIDE, width=-(-w // STRIDE), height=-(-h // STRIDE))


def feature_depth(depth) -> np.ndarray:
    """Point-sample a full resolution map at the feature-pixel sites."""
    return np.asarray(depth)[..., ::STRIDE, ::STRIDE]
