"""Plane-sweep matching costs.

The 4D volume holds ``|warp(source, d_i) - target|`` per depth plane, channel
and pixel. Entries whose reprojection leaves the source image get a sentinel
cost: the largest valid cost in the same depth slice (the global maximum if
the slice has no valid entry), so they never win an argmin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .depthrange import DepthRange
from .geometry import Intrinsics, RigidPose, project_planes
from .tensor import ShapeError, as_tensor

DEFAULT_BINS = 64


@dataclass(frozen=True)
class DepthSamples:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        if v.size < 1:
            raise ValueError("depth samples are empty")
        if not (v > 0).all():
            raise ValueError("depth samples must be positive")
        if v.size > 1 and not (np.diff(v) > 0).all():
            raise ValueError("depth samples must be strictly increasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> float:
        return float(self.values[1] - self.values[0]) if len(self) > 1 else 0.0


def linear_depth_samples(rng: DepthRange, bins: int = DEFAULT_BINS) -> DepthSamples:
    if bins < 2:
        raise ValueError(f"need at least 2 depth bins, got {bins}")
    return DepthSamples(np.linspace(rng.d_min, rng.d_max, bins))


@dataclass
class CostVolume4D:
    data: np.ndarray  # [D, C, H, W]
    samples: DepthSamples
    valid: np.ndarray  # [D, H, W] bool

    def __post_init__(self):
        if self.data.ndim != 4 or self.data.shape[0] != len(self.samples):
            raise ShapeError(f"volume dims {list(self.data.shape)} vs {len(self.samples)} samples")
        if self.valid.shape != (self.data.shape[0],) + self.data.shape[2:]:
            raise ShapeError(f"valid mask dims {list(self.valid.shape)} do not match volume")

    def channel_major(self) -> np.ndarray:
        """The volume as [C, D, H, W], the layout the 3D network consumes."""
        return np.ascontiguousarray(self.data.transpose(1, 0, 2, 3))


def _fill_sentinel(vol: np.ndarray) -> None:
    """Replace the -1 markers written by the sweep kernels in place."""
    bad = vol < 0
    if not bad.any():
        return
    masked = np.where(bad, -np.inf, vol)
    slice_max = masked.reshape(vol.shape[0], -1).max(axis=1)
    finite = np.isfinite(slice_max)
    fallback = slice_max[finite].max() if finite.any() else 0.0
    slice_max = np.where(finite, slice_max, fallback).astype(np.float32)
    for d in range(vol.shape[0]):
        np.copyto(vol[d], slice_max[d], where=bad[d])


def build_cost_volume(source, target, samples: DepthSamples, pose: RigidPose,
                      intrinsics: Intrinsics, threads: int | None = None) -> CostVolume4D:
    source = as_tensor(source, 3, "source features")
    target = as_tensor(target, 3, "target features")
    if source.shape != target.shape:
        raise ShapeError(f"feature dims differ: source {list(source.shape)}, target {list(target.shape)}")
    if (intrinsics.height, intrinsics.width) != source.shape[1:]:
        raise ShapeError(f"intrinsics are for {intrinsics.width}x{intrinsics.height}, "
                         f"features are {source.shape[2]}x{source.shape[1]}")
    if len(samples) == 0:
        raise ValueError("no depth samples")
    gx, gy, valid = project_planes(samples.values, pose, intrinsics)
    gx = np.ascontiguousarray(np.nan_to_num(gx))
    gy = np.ascontiguousarray(np.nan_to_num(gy))
    n = threads or _backend.threads()
    vol = _backend.kernels().sweep_abs_diff(source, target, gx, gy,
                                            np.ascontiguousarray(valid, dtype=np.uint8), n)
    _fill_sentinel(vol)
    return CostVolume4D(vol, samples, valid)


def channel_mean_volume(volume: CostVolume4D | np.ndarray) -> np.ndarray:
    """Mean over the channel axis: [D, C, H, W] -> [D, H, W].

    Channels are summed in ascending value order per cell, so the result does
    not depend on channel order.
    """
    data = volume.data if isinstance(volume, CostVolume4D) else as_tensor(volume, 4, "volume")
    out = np.empty((data.shape[0],) + data.shape[2:], dtype=np.float32)
    for d in range(data.shape[0]):
        ordered = np.sort(data[d], axis=0).astype(np.float64)
        out[d] = ordered.sum(axis=0) / data.shape[1]
    return out


def depth_argmin_index(volume3d) -> np.ndarray:
    vol = as_tensor(volume3d, 3, "volume")
    return np.argmin(vol, axis=0)  # first index wins ties


def depth_argmin_map(volume3d, samples: DepthSamples) -> np.ndarray:
    vol = as_tensor(volume3d, 3, "volume")
    if vol.shape[0] != len(samples):
        raise ShapeError(f"volume has {vol.shape[0]} depth slices, {len(samples)} samples given")
    return samples.values[depth_argmin_index(vol)].astype(np.float32)


def channelwise_argmin_map(volume: CostVolume4D) -> np.ndarray:
    """Per-channel argmin depth, summarized per pixel by the median over channels.

    This keeps the channel axis through the minimum search, the counterpart
    of :func:`depth_argmin_map` on the channel-mean volume.
    """
    idx = np.argmin(volume.data, axis=0)  # [C, H, W]
    depths = volume.samples.values[idx]
    return np.median(depths, axis=0).astype(np.float32)
