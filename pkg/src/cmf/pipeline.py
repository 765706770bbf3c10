"""End-to-end orchestration: features, plane sweep, 3D network, decoder and
optional evaluation."""

from __future__ import annotations

import dataclasses
import logging
import os
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import _backend, cmft, imageio
from .costvolume import (DEFAULT_BINS, build_cost_volume, channel_mean_volume, depth_argmin_map,
                         linear_depth_samples)
from .decoder import DEFAULT_MAPS, DEFAULT_SCORE_FLOOR, DEFAULT_THRESHOLD, DecoderParams, predict, binarize
from .depthrange import DepthRange, preset
from .features import DEFAULT_CHANNELS, FeaturePyramid, extract_features, feature_intrinsics
from .geometry import Intrinsics, RigidPose
from .metrics import InstanceSet, MetricReport, evaluate
from .motionnet import MotionNetConfig, MotionNetParams, forward

log = logging.getLogger("cmf")

DEFAULT_PRESET = "vcas-320x960"


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage


def log_stage(stage: str, **fields) -> None:
    parts = [f"stage={stage}"] + [f"{k}={v}" for k, v in fields.items()]
    log.info(" ".join(parts))


def _dims(a) -> str:
    return "x".join(str(n) for n in np.shape(a))


@dataclass(frozen=True)
class PipelineConfig:
    preset: str | None = DEFAULT_PRESET
    d_min: float | None = None
    d_max: float | None = None
    bins: int = DEFAULT_BINS
    channels: int = DEFAULT_CHANNELS
    feature_seed: int = 0
    net_weights: str | None = None
    net_seed: int = 0
    decoder_weights: str | None = None
    decoder_seed: int = 0
    decoder_init: str = "random"
    maps: int = DEFAULT_MAPS
    threshold: float = DEFAULT_THRESHOLD
    score_floor: float = DEFAULT_SCORE_FLOOR
    threads: int | None = None
    out_dir: str | None = None
    dump: bool = False
    dump_argmin: bool = False

    def resolved(self) -> "PipelineConfig":
        """Copy with every default made explicit; an explicit d_min/d_max pair
        overrides the preset."""
        if self.d_min is not None or self.d_max is not None:
            if self.d_min is None or self.d_max is None:
                raise ValueError("give both d_min and d_max")
            rng, name = DepthRange(self.d_min, self.d_max), None
        else:
            name = self.preset or DEFAULT_PRESET
            rng = preset(name)
        if self.bins < 2 or self.bins % 4:
            raise ValueError(f"bins must be >= 4 and divisible by 4, got {self.bins}")
        if self.decoder_init not in ("random", "zero"):
            raise ValueError(f"decoder_init must be 'random' or 'zero', got {self.decoder_init!r}")
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if (self.dump or self.dump_argmin) and not self.out_dir:
            raise ValueError("dumping intermediates needs an output directory")
        return dataclasses.replace(self, preset=name, d_min=rng.d_min, d_max=rng.d_max,
                                   threads=self.threads or _backend.threads())

    @property
    def depth_range(self) -> DepthRange:
        return DepthRange(self.d_min, self.d_max)

    def lines(self, runtime: bool = True) -> list[str]:
        """``key = value`` lines; ``runtime=False`` leaves out settings that
        cannot change results (threads, output location)."""
        skip = () if runtime else ("threads", "out_dir")
        return [f"{f.name} = {getattr(self, f.name)}" for f in dataclasses.fields(self) if f.name not in skip]


@dataclass
class PipelineResult:
    config: PipelineConfig
    instances: InstanceSet
    soft_masks: np.ndarray
    objectness: np.ndarray
    motion_features: np.ndarray
    argmin: np.ndarray
    report: MetricReport | None
    intermediates: dict


def _load_net(cfg: PipelineConfig) -> MotionNetParams:
    if cfg.net_weights:
        params = MotionNetParams.load(cfg.net_weights)
        if params.depth != cfg.bins:
            raise ValueError(f"network collapses depth {params.depth}, config has {cfg.bins} bins")
        return params
    return MotionNetParams.init(MotionNetConfig(volume_channels=cfg.channels, depth=cfg.bins,
                                                guide2_channels=cfg.channels,
                                                guide3_channels=cfg.channels), seed=cfg.net_seed)


def _load_decoder(cfg: PipelineConfig, channels: int) -> DecoderParams:
    if cfg.decoder_weights:
        return DecoderParams.load(cfg.decoder_weights)
    if cfg.decoder_init == "zero":
        return DecoderParams.zeros(channels, cfg.maps)
    return DecoderParams.init(channels, cfg.maps, seed=cfg.decoder_seed)


def run_pipeline(frame_prev, frame_next, pose: RigidPose, intrinsics: Intrinsics,
                 config: PipelineConfig = PipelineConfig(), gt: InstanceSet | None = None,
                 features: tuple[FeaturePyramid, FeaturePyramid] | None = None) -> PipelineResult:
    """Run every stage; ``intrinsics`` describe the input frames.

    ``features`` replaces the built-in extractor with precomputed
    (previous, next) pyramids at 1/4, 1/8 and 1/16 resolution.
    """
    cfg = config.resolved()
    n = cfg.threads
    inter: dict[str, np.ndarray] = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:
            raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        return out, time.perf_counter() - t0

    with threadpool_limits(limits=1, user_api="blas"):
        if features is None:
            (fp, fn_), dt = stage("features", lambda: (extract_features(frame_prev, cfg.channels, cfg.feature_seed),
                                                       extract_features(frame_next, cfg.channels, cfg.feature_seed)))
        else:
            (fp, fn_), dt = features, 0.0
        log_stage("features", dims=_dims(fn_.f1), f2=_dims(fn_.f2), f3=_dims(fn_.f3), seconds=f"{dt:.3f}")
        inter.update(f1_prev=fp.f1, f1_next=fn_.f1, f2=fn_.f2, f3=fn_.f3)

        def sweep():
            if (intrinsics.height, intrinsics.width) != tuple(np.shape(frame_next)[1:]):
                raise ValueError(f"intrinsics are for {intrinsics.width}x{intrinsics.height}, "
                                 f"frames are {_dims(frame_next)}")
            kq = feature_intrinsics(intrinsics)
            if (kq.height, kq.width) != fn_.f1.shape[1:]:
                raise ValueError(f"feature dims {_dims(fn_.f1)} do not match 1/4 of the "
                                 f"{intrinsics.width}x{intrinsics.height} frames")
            samples = linear_depth_samples(cfg.depth_range, cfg.bins)
            return build_cost_volume(fp.f1, fn_.f1, samples, pose, kq, n)

        vol, dt = stage("costvol", sweep)
        log_stage("costvol", dims=_dims(vol.data), d_min=cfg.d_min, d_max=cfg.d_max,
                  valid=f"{vol.valid.mean():.4f}", seconds=f"{dt:.3f}")
        inter.update(volume=vol.data, valid=vol.valid.astype(np.float32))
        argmin = depth_argmin_map(channel_mean_volume(vol), vol.samples)
        inter["argmin"] = argmin

        params, _ = stage("motionnet", lambda: _load_net(cfg))
        cmf_feat, dt = stage("motionnet", lambda: forward(vol, fn_.f2, fn_.f3, params, n))
        log_stage("motionnet", dims=_dims(cmf_feat.data), seconds=f"{dt:.3f}")
        inter["motion_features"] = cmf_feat.data

        def dec():
            dp = _load_decoder(cfg, cmf_feat.data.shape[0])
            pred = predict(cmf_feat, dp)
            return pred, binarize(pred, cfg.threshold, cfg.score_floor)

        (pred, inst), dt = stage("decoder", dec)
        inst = upsample_instances(inst, cmf_feat.stride, np.shape(frame_next)[1:])
        log_stage("decoder", maps=pred.soft_masks.shape[0], instances=len(inst), seconds=f"{dt:.3f}")
        inter.update(soft_masks=pred.soft_masks, objectness=pred.objectness)

        report = None
        if gt is not None:
            report, _ = stage("eval", lambda: evaluate(inst, gt))
            log_stage("eval", caq=f"{report.caq:.6f}", f_measure=f"{report.f_measure:.6f}")

    result = PipelineResult(cfg, inst, pred.soft_masks, pred.objectness, cmf_feat.data, argmin, report, inter)
    if cfg.out_dir:
        _, dt = stage("write", lambda: write_outputs(result))
        log_stage("write", out=cfg.out_dir, seconds=f"{dt:.3f}")
    return result


def upsample_nearest(mask, stride: int, shape) -> np.ndarray:
    """Full-resolution copy of a map sampled at every ``stride``-th pixel:
    each pixel takes the value of the nearest sampling site."""
    h, w = shape
    rows = np.minimum(np.rint(np.arange(h) / stride).astype(np.intp), mask.shape[0] - 1)
    cols = np.minimum(np.rint(np.arange(w) / stride).astype(np.intp), mask.shape[1] - 1)
    return mask[np.ix_(rows, cols)]


def upsample_instances(inst: InstanceSet, stride: int, shape) -> InstanceSet:
    return InstanceSet([upsample_nearest(m, stride, shape) for m in inst.masks], inst.scores, tuple(shape))


def overlay(frame, labels) -> np.ndarray:
    """Color overlay of an indexed instance map on a [3, H, W] frame."""
    rgb = np.array(frame, dtype=np.float64)
    if rgb.shape[0] == 1:
        rgb = np.repeat(rgb, 3, axis=0)
    ids = [i for i in np.unique(labels) if i]
    for i in ids:
        hue = (int(i) * 0.61803398875) % 1.0
        color = np.array([abs(hue * 6 - 3) - 1, 2 - abs(hue * 6 - 2), 2 - abs(hue * 6 - 4)]).clip(0, 1)
        m = labels == i
        rgb[:, m] = 0.5 * rgb[:, m] + 0.5 * color[:, None]
    return rgb


def write_outputs(result: PipelineResult) -> None:
    cfg = result.config
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    labels = result.instances.label_map()
    imageio.write_labels(os.path.join(out, "pred.pgm"), labels)
    cmft.write(os.path.join(out, "motion_features.cmft"), result.motion_features)
    with open(os.path.join(out, "config.txt"), "w") as f:
        f.write("\n".join(cfg.lines(runtime=False)) + "\n")
    with open(os.path.join(out, "instances.csv"), "w") as f:
        f.write("id,score,pixels\n")
        for i, (m, s) in enumerate(zip(result.instances.masks, result.instances.scores)):
            f.write(f"{i + 1},{s!r},{int(m.sum())}\n")
    if result.report is not None:
        with open(os.path.join(out, "metrics.csv"), "w") as f:
            row = result.report.row()
            f.write(",".join(row) + "\n" + ",".join(repr(v) for v in row.values()) + "\n")
    if cfg.dump_argmin or cfg.dump:
        cmft.write(os.path.join(out, "argmin.cmft"), result.argmin)
        imageio.write_pgm(os.path.join(out, "argmin.pgm"), imageio.normalized(result.argmin, cfg.d_min, cfg.d_max))
    if cfg.dump:
        for name, arr in result.intermediates.items():
            cmft.write(os.path.join(out, f"{name}.cmft"), arr)
