"""Depth-range policies for the plane sweep.

Two ways to pick ``[d_min, d_max]``: an exponential moving average of
per-batch extremes, and nearest-rank percentiles over per-object mean depths
of moving instances.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

EMA_KEEP = 0.99
EMA_RATE = 0.01
DEFAULT_INIT = (0.1, 10.0)


@dataclass(frozen=True)
class DepthRange:
    d_min: float
    d_max: float

    def __post_init__(self):
        if not (0 < self.d_min < self.d_max):
            raise ValueError(f"need 0 < d_min < d_max, got ({self.d_min}, {self.d_max})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.d_min, self.d_max)


PRESETS = {
    "kitti": DepthRange(0.090, 2.465),
    "vcas-320x960": DepthRange(0.091, 2.646),
    "vcas-kitti": DepthRange(0.081, 2.424),
    "vcas-cityscapes": DepthRange(0.101, 2.444),
    "manydepth-vcas-320x960": DepthRange(0.114, 17.95),
    "manydepth-kitti": DepthRange(0.105, 8.471),
    "manydepth-cityscapes": DepthRange(0.105, 27.05),
}


def preset(name: str) -> DepthRange:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown depth-range preset {name!r}; known: {', '.join(PRESETS)}") from None


def ema_update(rng: DepthRange, batch_min: float, batch_max: float) -> DepthRange:
    if not (batch_min > 0 and batch_max > 0):
        raise ValueError(f"batch extremes must be positive, got ({batch_min}, {batch_max})")
    return DepthRange(EMA_KEEP * rng.d_min + EMA_RATE * batch_min,
                      EMA_KEEP * rng.d_max + EMA_RATE * batch_max)


def ema_replay(init: DepthRange, stream) -> DepthRange:
    rng = init
    for lo, hi in stream:
        rng = ema_update(rng, lo, hi)
    return rng


@dataclass(frozen=True)
class ObjectDepthSample:
    mean_depth: float

    def __post_init__(self):
        if not self.mean_depth > 0:
            raise ValueError(f"mean depth must be positive, got {self.mean_depth}")


@dataclass
class ObjectDepths:
    samples: list[ObjectDepthSample]
    skipped_empty: int = 0


def object_mean_depths(depth_map, masks) -> ObjectDepths:
    """Mean depth inside each mask; empty masks are skipped and counted."""
    depth = np.asarray(depth_map, dtype=np.float64)
    out, skipped = [], 0
    for i, m in enumerate(masks):
        m = np.asarray(m, dtype=bool)
        if m.shape != depth.shape:
            raise ValueError(f"mask {i} dims {list(m.shape)} != depth dims {list(depth.shape)}")
        n = int(m.sum())
        if n == 0:
            skipped += 1
            continue
        out.append(ObjectDepthSample(float(depth[m].sum() / n)))
    if skipped:
        log.warning("skipped %d empty instance mask(s)", skipped)
    return ObjectDepths(out, skipped)


def nearest_rank(sorted_values, p: float):
    n = len(sorted_values)
    rank = max(1, math.ceil(p * n / 100.0))
    return sorted_values[rank - 1]


def percentile_range(samples, p_lo: float = 1.0, p_hi: float = 99.0) -> DepthRange:
    values = sorted(s.mean_depth if isinstance(s, ObjectDepthSample) else float(s) for s in samples)
    if len(values) < 2:
        raise ValueError(f"need at least 2 depth samples, got {len(values)}")
    if not (0 <= p_lo < p_hi <= 100):
        raise ValueError(f"need 0 <= p_lo < p_hi <= 100, got ({p_lo}, {p_hi})")
    lo, hi = nearest_rank(values, p_lo), nearest_rank(values, p_hi)
    if not lo < hi:
        raise ValueError(f"percentiles collapse to a single depth {lo}")
    return DepthRange(lo, hi)


def histogram_csv(samples, bins: int = 50) -> str:
    """Depth histogram of the samples as ``lo,hi,count`` rows."""
    values = np.array([s.mean_depth if isinstance(s, ObjectDepthSample) else s for s in samples])
    counts, edges = np.histogram(values, bins=bins)
    rows = ["lo,hi,count"]
    rows += [f"{edges[i]:.6g},{edges[i + 1]:.6g},{counts[i]}" for i in range(bins)]
    return "\n".join(rows) + "\n"
