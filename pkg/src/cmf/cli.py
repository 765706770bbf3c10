"""Batch command-line front end.

Logs go to stderr as ``stage=<name> key=value`` lines; results go to stdout
or files. Poses in camera files map target (t) camera points into the source
(t-1) camera: ``p_src = R p_tgt + t``.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
import time

import numpy as np

from . import _backend, cmft, imageio
from .costvolume import (DEFAULT_BINS, build_cost_volume, channel_mean_volume, channelwise_argmin_map,
                         depth_argmin_map, linear_depth_samples)
from .decoder import DEFAULT_MAPS, DEFAULT_SCORE_FLOOR, DEFAULT_THRESHOLD, DecoderParams, binarize, predict
from .depthrange import (DEFAULT_INIT, PRESETS, DepthRange, ema_replay, histogram_csv, object_mean_depths,
                         percentile_range, preset)
from .features import DEFAULT_CHANNELS, FeaturePyramid, extract_features, feature_intrinsics
from .geometry import Intrinsics, load_camera, save_camera, warp_feature_plane
from .kvfile import format_kv
from .losses import LossComponents, LossWeights, dice_loss, focal_loss, objectness_bce, pixel_bce, total_loss
from .metrics import InstanceSet, MetricReport, aggregate, evaluate
from .motionnet import MotionNetConfig, MotionNetParams, forward
from .pipeline import PipelineConfig, StageError, log_stage, overlay, run_pipeline, upsample_nearest
from .scene import evaluation_mask, generate, load_spec, random_spec, save_spec

log = logging.getLogger("cmf")


class CliError(RuntimeError):
    pass


# ---------------------------------------------------------------- helpers

def _floats(text: str, n: int, what: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(" ", "").split(",")]
    except ValueError:
        raise CliError(f"{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise CliError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    return vals


def _range_from(args) -> DepthRange:
    if getattr(args, "range", None):
        return DepthRange(*_floats(args.range, 2, "--range"))
    return preset(args.preset)


def _add_range(p) -> None:
    p.add_argument("--preset", default="vcas-320x960", choices=sorted(PRESETS),
                   help="named depth range (default: vcas-320x960 = [0.091, 2.646])")
    p.add_argument("--range", metavar="DMIN,DMAX", help="explicit depth range; overrides --preset")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="depth hypotheses (default: 64)")


def _read_input(path) -> np.ndarray:
    """Image (PPM/PGM) or CMFT tensor as a [C, H, W] float32 array."""
    if path.endswith(".cmft"):
        a = cmft.read(path)
        return a[None] if a.ndim == 2 else a
    return imageio.read_image(path)


def _is_image(path) -> bool:
    return not path.endswith(".cmft")


def _feature_camera(k: Intrinsics, dims) -> Intrinsics:
    h, w = dims
    if (k.height, k.width) == (h, w):
        return k
    q = feature_intrinsics(k)
    if (q.height, q.width) == (h, w):
        return q
    raise CliError(f"camera is {k.width}x{k.height}; features are {w}x{h} (neither equal nor 1/4)")


def _threads(args) -> int | None:
    return getattr(args, "threads", None) or None


# ---------------------------------------------------------------- scene

def cmd_scene_gen(args) -> int:
    if args.spec:
        spec = load_spec(args.spec)
    else:
        spec = random_spec(args.seed, width=args.width, height=args.height, movers=args.movers,
                           statics=args.statics)
    t0 = time.perf_counter()
    b = generate(spec, args.seed)
    out = args.out
    os.makedirs(out, exist_ok=True)
    imageio.write_ppm(os.path.join(out, "frame_prev.ppm"), b.frame_prev)
    imageio.write_ppm(os.path.join(out, "frame_next.ppm"), b.frame_next)
    cmft.write(os.path.join(out, "depth_next.cmft"), b.depth_next)
    save_camera(os.path.join(out, "camera.txt"), b.intrinsics, b.pose)
    save_spec(os.path.join(out, "scene.cfg"), spec)
    for i, m in enumerate(b.motion_masks):
        imageio.write_pgm(os.path.join(out, f"mask_{i + 1}.pgm"), m.astype(np.float32))
    imageio.write_labels(os.path.join(out, "motion_labels.pgm"),
                         InstanceSet(b.motion_masks, None, b.depth_next.shape).label_map())
    imageio.write_pgm(os.path.join(out, "eval_mask.pgm"), evaluation_mask(b).astype(np.float32))
    log_stage("scene", seed=args.seed, dims=f"{spec.width}x{spec.height}", movers=len(b.motion_masks),
              seconds=f"{time.perf_counter() - t0:.3f}")
    print(out)
    return 0


# ---------------------------------------------------------------- warp

def cmd_warp(args) -> int:
    src = _read_input(args.source)
    k, pose = load_camera(args.camera)
    k = _feature_camera(k, src.shape[1:])
    out = warp_feature_plane(src, args.depth, pose, k, _threads(args))
    if args.out.endswith((".ppm", ".pgm")):
        if out.shape[0] == 3:
            imageio.write_ppm(args.out, out)
        else:
            imageio.write_pgm(args.out, out[0])
    else:
        cmft.write(args.out, out)
    log_stage("warp", depth=args.depth, dims="x".join(map(str, out.shape)))
    return 0


# ---------------------------------------------------------------- costvol

def _pyramids(args) -> tuple[FeaturePyramid | None, np.ndarray, np.ndarray]:
    prev, nxt = _read_input(args.prev), _read_input(args.next)
    if _is_image(args.prev) != _is_image(args.next):
        raise CliError("--prev and --next must both be images or both be CMFT features")
    if _is_image(args.prev):
        fp = extract_features(prev, args.channels, args.feature_seed)
        fn = extract_features(nxt, args.channels, args.feature_seed)
        return fn, fp.f1, fn.f1
    return None, prev, nxt


def cmd_costvol_build(args) -> int:
    t0 = time.perf_counter()
    pyr, f_prev, f_next = _pyramids(args)
    k, pose = load_camera(args.camera)
    k = _feature_camera(k, f_next.shape[1:])
    samples = linear_depth_samples(_range_from(args), args.bins)
    vol = build_cost_volume(f_prev, f_next, samples, pose, k, _threads(args))
    if args.mode == "channel-mean":
        reduced = channel_mean_volume(vol)
        cmft.write(args.out, reduced)
        argmin = depth_argmin_map(reduced, samples)
    else:
        cmft.write(args.out, vol.data)
        argmin = channelwise_argmin_map(vol)
    if args.valid:
        cmft.write(args.valid, vol.valid.astype(np.float32))
    if args.argmin:
        cmft.write(args.argmin, argmin)
    if args.argmin_pgm:
        imageio.write_pgm(args.argmin_pgm, imageio.normalized(argmin, samples.values[0], samples.values[-1]))
    if args.features_out:
        if pyr is None:
            raise CliError("--features-out needs image inputs")
        os.makedirs(args.features_out, exist_ok=True)
        cmft.write(os.path.join(args.features_out, "f1.cmft"), pyr.f1)
        cmft.write(os.path.join(args.features_out, "f2.cmft"), pyr.f2)
        cmft.write(os.path.join(args.features_out, "f3.cmft"), pyr.f3)
    log_stage("costvol", mode=args.mode, dims="x".join(map(str, vol.data.shape)),
              d_min=samples.values[0], d_max=samples.values[-1], valid=f"{vol.valid.mean():.4f}",
              seconds=f"{time.perf_counter() - t0:.3f}")
    return 0


# ---------------------------------------------------------------- features

def cmd_features_extract(args) -> int:
    t0 = time.perf_counter()
    vol = cmft.read(args.volume)
    if vol.ndim != 4:
        raise CliError(f"{args.volume}: expected a rank-4 D x C x H x W volume, got dims {list(vol.shape)}")
    f2, f3 = cmft.read(args.f2), cmft.read(args.f3)
    if args.weights:
        params = MotionNetParams.load(args.weights)
    else:
        d, c = vol.shape[:2]
        params = MotionNetParams.init(MotionNetConfig(volume_channels=c, depth=d, guide2_channels=f2.shape[0],
                                                      guide3_channels=f3.shape[0]), seed=args.seed)
    x = np.ascontiguousarray(vol.transpose(1, 0, 2, 3))
    feats = forward(x, f2, f3, params, _threads(args))
    cmft.write(args.out, feats.data)
    if args.viz:
        os.makedirs(args.viz, exist_ok=True)
        for c, ch in enumerate(feats.data):
            mag = np.abs(ch)
            top = float(mag.max())
            imageio.write_pgm(os.path.join(args.viz, f"channel_{c:03d}.pgm"), imageio.normalized(mag, 0.0, top))
    log_stage("features", dims="x".join(map(str, feats.data.shape)), seconds=f"{time.perf_counter() - t0:.3f}")
    return 0


# ---------------------------------------------------------------- segment

def cmd_segment(args) -> int:
    feats = cmft.read(args.features)
    if feats.ndim != 3:
        raise CliError(f"{args.features}: expected C x H x W features, got dims {list(feats.shape)}")
    if args.weights:
        params = DecoderParams.load(args.weights)
    elif args.init == "zero":
        params = DecoderParams.zeros(feats.shape[0], args.maps)
    else:
        params = DecoderParams.init(feats.shape[0], args.maps, seed=args.seed)
    pred = predict(feats, params)
    inst = binarize(pred, args.threshold, args.score_floor)
    labels = inst.label_map()
    imageio.write_labels(args.out, labels)
    if args.overlay:
        if not args.frame:
            raise CliError("--overlay needs --frame")
        frame = imageio.read_image(args.frame)
        if frame.shape[1:] != labels.shape:
            labels = upsample_nearest(labels, -(-frame.shape[1] // labels.shape[0]), frame.shape[1:])
        imageio.write_ppm(args.overlay, overlay(frame, labels))
    for i, s in enumerate(inst.scores):
        print(f"{i + 1},{s:.6f},{int(inst.masks[i].sum())}")
    log_stage("segment", maps=params.maps, instances=len(inst))
    return 0


# ---------------------------------------------------------------- range

def _expand(pattern: str) -> list[str]:
    files = sorted(glob.glob(pattern))
    if not files:
        raise CliError(f"no files match {pattern!r}")
    return files


def cmd_range_fit(args) -> int:
    depths, masks = _expand(args.depths), _expand(args.masks)
    if len(depths) != len(masks):
        raise CliError(f"{len(depths)} depth files but {len(masks)} mask files")
    samples, skipped = [], 0
    for dpath, mpath in zip(depths, masks):
        depth = cmft.read(dpath)
        labels = imageio.read_labels(mpath)
        inst = [labels == i for i in np.unique(labels) if i != 0]
        got = object_mean_depths(depth, inst)
        samples += got.samples
        skipped += got.skipped_empty
    rng = percentile_range(samples, args.p_lo, args.p_hi)
    print(f"d_min = {rng.d_min!r}\nd_max = {rng.d_max!r}")
    if args.out:
        with open(args.out, "w") as f:
            f.write(format_kv({"d_min": repr(rng.d_min), "d_max": repr(rng.d_max), "p_lo": args.p_lo,
                               "p_hi": args.p_hi, "objects": len(samples)}))
    if args.histogram:
        with open(args.histogram, "w") as f:
            f.write(histogram_csv(samples))
    log_stage("range", policy="percentile", objects=len(samples), skipped_empty=skipped,
              d_min=rng.d_min, d_max=rng.d_max)
    return 0


def _read_stream(path):
    out = []
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise CliError(f"{path}:{lineno}: expected 'batch_min batch_max'")
            out.append((float(parts[0]), float(parts[1])))
    return out


def cmd_range_ema(args) -> int:
    init = DepthRange(*_floats(args.init, 2, "--init"))
    stream = _read_stream(args.stream)
    rng = ema_replay(init, stream)
    print(f"d_min = {rng.d_min!r}\nd_max = {rng.d_max!r}")
    if args.out:
        with open(args.out, "w") as f:
            f.write(format_kv({"d_min": repr(rng.d_min), "d_max": repr(rng.d_max), "batches": len(stream)}))
    log_stage("range", policy="ema", batches=len(stream), d_min=rng.d_min, d_max=rng.d_max)
    return 0


# ---------------------------------------------------------------- loss

def cmd_loss_eval(args) -> int:
    pred = cmft.read(args.pred)
    gt = imageio.read_labels(args.gt) > 0
    if pred.shape != gt.shape:
        raise CliError(f"prediction dims {list(pred.shape)} != ground-truth dims {list(gt.shape)}")
    weights = LossWeights.parse(args.weights)
    dice, _ = dice_loss(pred, gt)
    pix, _ = pixel_bce(pred, gt)
    cls = 0.0
    if args.scores:
        cls, _ = focal_loss(cmft.read(args.scores).ravel(), args.gt_class)
    obj = 0.0
    if args.objectness is not None:
        obj, _ = objectness_bce(args.objectness, args.obj_target)
    comps = LossComponents(dice, pix, cls, obj)
    total = total_loss(comps, weights)
    rows = [("dice", dice), ("pixel_bce", pix), ("focal", cls), ("objectness", obj), ("total", total)]
    width = max(len(n) for n, _ in rows)
    for name, v in rows:
        print(f"{name:<{width}}  {v:.9f}")
    print(",".join(n for n, _ in rows))
    print(",".join(repr(float(v)) for _, v in rows))
    log_stage("loss", total=f"{total:.9f}")
    return 0


# ---------------------------------------------------------------- eval

def cmd_eval(args) -> int:
    pred_files = {os.path.basename(p): p for p in glob.glob(os.path.join(args.pred, "*.pgm"))}
    gt_files = {os.path.basename(p): p for p in glob.glob(os.path.join(args.gt, "*.pgm"))}
    names = sorted(set(pred_files) & set(gt_files))
    if not names:
        raise CliError(f"no PGM files with matching names in {args.pred} and {args.gt}")
    missing = sorted(set(gt_files) - set(pred_files))
    if missing:
        log_stage("eval", warning="missing_predictions", count=len(missing))
    cols = ["sq", "rq", "caq", "tp", "fn", "fp", "panoptic_rq"] if args.mode == "caq" else \
        ["f_measure", "bg_iou", "tp", "fn", "fp"]
    lines = ["# f_measure is pixel-level over instance-mask unions; rq = tp / (tp + fn)",
             ",".join(["image"] + cols)]
    reports: list[MetricReport] = []
    for name in names:
        pred = InstanceSet.from_label_map(imageio.read_labels(pred_files[name]))
        gt = InstanceSet.from_label_map(imageio.read_labels(gt_files[name]))
        r = evaluate(pred, gt)
        reports.append(r)
        lines.append(",".join([name] + [_fmt(getattr(r, c)) for c in cols]))
    agg = aggregate(reports)
    lines.append(",".join(["ALL"] + [_fmt(getattr(agg, c)) for c in cols]))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    log_stage("eval", mode=args.mode, images=len(names), caq=f"{agg.caq:.6f}", f_measure=f"{agg.f_measure:.6f}")
    return 0


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else f"{v:.6f}"


# ---------------------------------------------------------------- net

def cmd_net_init(args) -> int:
    cfg = MotionNetConfig(volume_channels=args.channels, depth=args.bins, guide2_channels=args.channels,
                          guide3_channels=args.channels)
    MotionNetParams.init(cfg, seed=args.seed).save(args.out)
    if args.decoder_out:
        dp = DecoderParams.zeros(args.channels, args.maps) if args.decoder_init == "zero" else \
            DecoderParams.init(args.channels, args.maps, seed=args.seed)
        dp.save(args.decoder_out)
    log_stage("net", seed=args.seed, out=args.out, depth=args.bins, channels=args.channels)
    return 0


# ---------------------------------------------------------------- pipeline

def cmd_pipeline_run(args) -> int:
    if args.scene:
        prev = args.prev or os.path.join(args.scene, "frame_prev.ppm")
        nxt = args.next or os.path.join(args.scene, "frame_next.ppm")
        camera = args.camera or os.path.join(args.scene, "camera.txt")
        gt_path = args.gt or os.path.join(args.scene, "motion_labels.pgm")
    else:
        if not (args.prev and args.next and args.camera):
            raise CliError("give --scene or all of --prev, --next and --camera")
        prev, nxt, camera, gt_path = args.prev, args.next, args.camera, args.gt
    frame_prev, frame_next = imageio.read_image(prev), imageio.read_image(nxt)
    k, pose = load_camera(camera)
    gt = InstanceSet.from_label_map(imageio.read_labels(gt_path)) if gt_path and os.path.exists(gt_path) else None
    d_min = d_max = None
    if args.range:
        d_min, d_max = _floats(args.range, 2, "--range")
    cfg = PipelineConfig(preset=args.preset, d_min=d_min, d_max=d_max, bins=args.bins, channels=args.channels,
                         feature_seed=args.feature_seed, net_weights=args.net_weights, net_seed=args.seed,
                         decoder_weights=args.decoder_weights, decoder_seed=args.seed,
                         decoder_init=args.decoder_init, maps=args.maps, threshold=args.threshold,
                         score_floor=args.score_floor, threads=_threads(args), out_dir=args.out,
                         dump=args.dump, dump_argmin=args.dump_argmin).resolved()
    for line in cfg.lines():
        log.debug("stage=config %s", line.replace(" = ", "="))
    res = run_pipeline(frame_prev, frame_next, pose, k, cfg, gt)
    print(f"instances = {len(res.instances)}")
    if res.report is not None:
        for key, v in res.report.row().items():
            print(f"{key} = {_fmt(v)}")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmf", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: $CMF_THREADS or all cores); results do not depend on it")
    ap.add_argument("--backend", choices=["auto", "native", "python"], default="auto",
                    help="kernel implementation (default: compiled if built)")
    ap.add_argument("-q", "--quiet", action="store_true", help="suppress stage logs")
    ap.add_argument("-v", "--verbose", action="store_true", help="also log the resolved configuration")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def group(name, help_):
        g = sub.add_parser(name, help=help_)
        return g.add_subparsers(dest="action", required=True, metavar="ACTION")

    # scene
    p = group("scene", "synthetic two-frame scenes").add_parser("gen", help="render a scene to a directory")
    p.add_argument("--spec", help="key=value scene file (default: a seeded random scene)")
    p.add_argument("--seed", type=int, default=0, help="texture / layout seed (default: 0)")
    p.add_argument("--width", type=int, default=384)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--movers", type=int, default=1, help="moving rectangles in a random scene (default: 1)")
    p.add_argument("--statics", type=int, default=2, help="static rectangles in a random scene (default: 2)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scene_gen)

    # warp
    p = sub.add_parser("warp", help="warp a source image/feature map to the target view at one depth")
    p.add_argument("--source", required=True, help="PPM/PGM image or C x H x W CMFT")
    p.add_argument("--camera", required=True, help="intrinsics + target-to-source pose file")
    p.add_argument("--depth", type=float, required=True)
    p.add_argument("--out", required=True, help=".cmft, or .ppm/.pgm for images")
    p.set_defaults(func=cmd_warp)

    # costvol
    p = group("costvol", "plane-sweep cost volumes").add_parser("build", help="build a cost volume")
    p.add_argument("--prev", required=True, help="source frame (t-1): image or C x H x W CMFT features")
    p.add_argument("--next", required=True, help="target frame (t): image or C x H x W CMFT features")
    p.add_argument("--camera", required=True, help="intrinsics + target-to-source pose file")
    _add_range(p)
    p.add_argument("--mode", choices=["channel-wise", "channel-mean"], default="channel-wise",
                   help="channel-wise keeps D x C x H x W; channel-mean averages channels to D x H x W "
                        "(ablation). Default: channel-wise")
    p.add_argument("--channels", type=int, default=DEFAULT_CHANNELS, help="built-in feature channels (default: 64)")
    p.add_argument("--feature-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--valid", help="write the D x H x W validity mask here")
    p.add_argument("--argmin", help="write the argmin depth map (CMFT) here")
    p.add_argument("--argmin-pgm", help="write the argmin depth map as an 8-bit PGM over [d_min, d_max]")
    p.add_argument("--features-out", help="directory for the target's f1/f2/f3 CMFT feature maps")
    p.set_defaults(func=cmd_costvol_build)

    # features
    p = group("features", "channel-wise motion features").add_parser("extract", help="run the 3D network")
    p.add_argument("--volume", required=True, help="D x C x H x W cost volume CMFT")
    p.add_argument("--f2", required=True, help="guide features at 1/2 the volume resolution")
    p.add_argument("--f3", required=True, help="guide features at 1/4 the volume resolution")
    p.add_argument("--weights", help="network weight directory (default: seeded init)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--viz", help="directory for per-channel 8-bit PGM heatmaps")
    p.set_defaults(func=cmd_features_extract)

    # segment
    p = sub.add_parser("segment", help="decode instance masks from motion features")
    p.add_argument("--features", required=True)
    p.add_argument("--weights", help="decoder weight directory (default: seeded init)")
    p.add_argument("--init", choices=["random", "zero"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--maps", type=int, default=DEFAULT_MAPS, help="activation maps (default: 32)")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="mask binarization, strict > (default: 0.5)")
    p.add_argument("--score-floor", type=float, default=DEFAULT_SCORE_FLOOR, help="minimum objectness (default: 0.3)")
    p.add_argument("--out", required=True, help="indexed instance map PGM")
    p.add_argument("--overlay", help="color overlay PPM")
    p.add_argument("--frame", help="frame to draw the overlay on")
    p.set_defaults(func=cmd_segment)

    # range
    g = group("range", "depth-range policies")
    p = g.add_parser("fit", help="percentile range over per-object mean depths")
    p.add_argument("--depths", required=True, help="glob of H x W depth CMFT files")
    p.add_argument("--masks", required=True, help="glob of indexed instance PGMs (same order as --depths)")
    p.add_argument("--p-lo", type=float, default=1.0, help="lower percentile (default: 1)")
    p.add_argument("--p-hi", type=float, default=99.0, help="upper percentile (default: 99)")
    p.add_argument("--out", help="range file to write")
    p.add_argument("--histogram", help="CSV histogram of object depths")
    p.set_defaults(func=cmd_range_fit)
    p = g.add_parser("ema", help="replay the moving-average range update over a batch log")
    p.add_argument("--init", default=f"{DEFAULT_INIT[0]},{DEFAULT_INIT[1]}",
                   help="initial DMIN,DMAX (default: 0.1,10.0)")
    p.add_argument("--stream", required=True, help="text file of 'batch_min batch_max' lines")
    p.add_argument("--out", help="range file to write")
    p.set_defaults(func=cmd_range_ema)

    # loss
    p = group("loss", "training losses").add_parser("eval", help="evaluate the loss stack on one pair")
    p.add_argument("--pred", required=True, help="H x W soft mask CMFT")
    p.add_argument("--gt", required=True, help="binary / indexed PGM (nonzero = foreground)")
    p.add_argument("--weights", default="2,3,2,5", help="lambda_C,lambda_S,lambda_D,lambda_P (default: 2,3,2,5)")
    p.add_argument("--scores", help="class probabilities CMFT for the focal term")
    p.add_argument("--gt-class", type=int, default=0)
    p.add_argument("--objectness", type=float, help="predicted objectness for the objectness term")
    p.add_argument("--obj-target", type=int, default=1, choices=[0, 1])
    p.set_defaults(func=cmd_loss_eval)

    # eval
    p = sub.add_parser("eval", help="motion-segmentation metrics over a directory of instance maps")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mode", choices=["caq", "kitti"], default="caq",
                   help="caq: SQ/RQ/CAQ columns; kitti: object F-measure and background IoU")
    p.add_argument("--out", help="CSV file to write")
    p.set_defaults(func=cmd_eval)

    # net
    p = group("net", "network weights").add_parser("init", help="write seeded network weights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", type=int, default=DEFAULT_CHANNELS)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="depth of the volumes the network accepts")
    p.add_argument("--out", required=True)
    p.add_argument("--decoder-out", help="also write decoder weights here")
    p.add_argument("--decoder-init", choices=["random", "zero"], default="random")
    p.add_argument("--maps", type=int, default=DEFAULT_MAPS)
    p.set_defaults(func=cmd_net_init)

    # pipeline
    p = group("pipeline", "end-to-end runs").add_parser("run", help="frames -> instances (+ metrics)")
    p.add_argument("--scene", help="directory written by 'scene gen' (fills the inputs below)")
    p.add_argument("--prev")
    p.add_argument("--next")
    p.add_argument("--camera")
    p.add_argument("--gt", help="indexed instance PGM for evaluation")
    _add_range(p)
    p.add_argument("--channels", type=int, default=DEFAULT_CHANNELS)
    p.add_argument("--feature-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0, help="network and decoder init seed (default: 0)")
    p.add_argument("--net-weights")
    p.add_argument("--decoder-weights")
    p.add_argument("--decoder-init", choices=["random", "zero"], default="random")
    p.add_argument("--maps", type=int, default=DEFAULT_MAPS)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--score-floor", type=float, default=DEFAULT_SCORE_FLOOR)
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="worker threads; overrides the global option")
    p.add_argument("--out", required=True)
    p.add_argument("--dump", action="store_true", help="write every intermediate as CMFT")
    p.add_argument("--dump-argmin", action="store_true", help="write the argmin depth map (CMFT + PGM)")
    p.set_defaults(func=cmd_pipeline_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose else logging.INFO)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False
    prev_state = dict(_backend._state)
    try:
        if args.backend != "auto":
            _backend.set_backend(args.backend)
        if args.threads is not None:
            if args.threads < 1:
                raise CliError("--threads must be >= 1")
            _backend.set_threads(args.threads)
        return args.func(args)
    except StageError as exc:
        log.error("stage=%s error=%s", exc.stage, str(exc).replace("\n", " "))
        return 1
    except (CliError, ValueError, OSError, FloatingPointError) as exc:
        log.error("stage=%s error=%s", args.command, str(exc).replace("\n", " "))
        return 1
    finally:
        _backend._state.update(prev_state)


if __name__ == "__main__":
    sys.exit(main())
