"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--threads N]

Each workload runs on both backends with identical inputs; the table reports
the best wall time, the speedup and the largest relative difference between
the two outputs.
"""

import argparse
import time

import numpy as np

from cmf import _backend
from cmf.costvolume import build_cost_volume, linear_depth_samples
from cmf.depthrange import DepthRange
from cmf.geometry import Intrinsics, RigidPose, bilinear_sample, project_plane, rotation_about
from cmf.tensor import Conv3dSpec, conv3d, transposed_conv3d


def _workloads(rng):
    x = rng.standard_normal((16, 16, 20, 60)).astype(np.float32)
    down = Conv3dSpec.init(16, 32, 3, 2, 1, rng=rng)
    same = Conv3dSpec.init(16, 32, 3, 1, 1, rng=rng)
    up = Conv3dSpec.init(16, 16, 4, 2, 1, rng=rng)

    k = Intrinsics(180.0, 180.0, 119.5, 39.5, 240, 80)
    pose = RigidPose(rotation_about([0, 1, 0], 0.02), [0.1, 0.0, 0.3])
    src = rng.standard_normal((64, 80, 240)).astype(np.float32)
    tgt = rng.standard_normal((64, 80, 240)).astype(np.float32)
    grid = project_plane(2.0, pose, k)
    samples = linear_depth_samples(DepthRange(1.0, 4.0), 16)

    return {
        "conv3d 16->32 k3 s1 on 16x20x60": lambda: conv3d(x, same),
        "conv3d 16->32 k3 s2 on 16x20x60": lambda: conv3d(x, down),
        "tconv3d 16->16 k4 s2 on 16x20x60": lambda: transposed_conv3d(x, up),
        "bilinear 64ch 80x240": lambda: bilinear_sample(src, grid),
        "cost volume 16 bins 64ch 80x240": lambda: build_cost_volume(src, tgt, samples, pose, k).data,
    }


def _best(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), np.asarray(out, dtype=np.float64)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    if not _backend.native_available():
        raise SystemExit("compiled extension is not built; run `pip install -e . --no-build-isolation`")
    _backend.set_threads(args.threads)

    print(f"{'workload':36s} {'native s':>9s} {'python s':>9s} {'speedup':>8s} {'max rel diff':>13s}")
    for name, fn in _workloads(np.random.default_rng(0)).items():
        with _backend.use_backend("native"):
            t_nat, a = _best(fn, args.repeat)
        with _backend.use_backend("python"):
            t_py, b = _best(fn, args.repeat)
        rel = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-30))
        print(f"{name:36s} {t_nat:9.4f} {t_py:9.4f} {t_py / t_nat:7.1f}x {rel:13.1e}")


if __name__ == "__main__":
    main()
