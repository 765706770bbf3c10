"""3D motion-extraction network, forward pass only.

The cost volume enters as ``[C, D, H, W]``. Two down-sampling blocks halve
depth and space, each followed by a sigmoid gate computed from the image
feature map at the matching resolution; two up-sampling blocks restore the
resolution (the first block's output is concatenated back in); a final
transposed convolution with a full-depth kernel collapses the depth axis,
leaving ``[C, H, W]`` motion features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costvolume import CostVolume4D
from .tensor import (Conv3dSpec, ShapeError, as_tensor, conv3d, hadamard, leaky_relu,
                     pointwise_conv2d, sigmoid, transposed_conv3d)
from .weights import Dense, Layer, load_layers, save_layers

SLOPE = 0.01
FEATURE_STRIDE = 4


@dataclass(frozen=True)
class MotionNetConfig:
    volume_channels: int = 64
    depth: int = 64
    down1: int = 64
    down2: int = 96
    up1: int = 64
    up2: int = 64
    out_channels: int = 64
    guide2_channels: int = 64
    guide3_channels: int = 64

    def __post_init__(self):
        for name, v in vars(self).items():
            if int(v) < 1:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.depth % 4:
            raise ValueError(f"depth {self.depth} must be divisible by 4")


@dataclass
class MotionNetParams:
    down1: tuple[Conv3dSpec, Conv3dSpec]
    down2: tuple[Conv3dSpec, Conv3dSpec, Conv3dSpec]
    up1: Conv3dSpec
    up2: tuple[Conv3dSpec, Conv3dSpec, Conv3dSpec]
    excite1: Dense
    excite2: Dense
    collapse: Conv3dSpec

    def __post_init__(self):
        self._check()

    def named_layers(self) -> list[Layer]:
        return [
            Layer("down1a", "conv3d", self.down1[0]), Layer("down1b", "conv3d", self.down1[1]),
            Layer("excite1", "pointwise", self.excite1),
            Layer("down2a", "conv3d", self.down2[0]), Layer("down2b", "conv3d", self.down2[1]),
            Layer("down2c", "conv3d", self.down2[2]),
            Layer("excite2", "pointwise", self.excite2),
            Layer("up1", "tconv3d", self.up1),
            Layer("up2a", "tconv3d", self.up2[0]), Layer("up2b", "conv3d", self.up2[1]),
            Layer("up2c", "conv3d", self.up2[2]),
            Layer("collapse", "tconv3d", self.collapse),
        ]

    def _check(self):
        d1, d2, u2 = self.down1, self.down2, self.up2
        chain = [("down1a", "down1b", d1[0].out_channels, d1[1].in_channels),
                 ("down1b", "down2a", d1[1].out_channels, d2[0].in_channels),
                 ("down2a", "down2b", d2[0].out_channels, d2[1].in_channels),
                 ("down2b", "down2c", d2[1].out_channels, d2[2].in_channels),
                 ("down2c", "up1", d2[2].out_channels, self.up1.in_channels),
                 ("up1+down1b", "up2a", self.up1.out_channels + d1[1].out_channels, u2[0].in_channels),
                 ("up2a", "up2b", u2[0].out_channels, u2[1].in_channels),
                 ("up2b", "up2c", u2[1].out_channels, u2[2].in_channels),
                 ("up2c", "collapse", u2[2].out_channels, self.collapse.in_channels),
                 ("down1b", "excite1", d1[1].out_channels, self.excite1.out_features),
                 ("down2c", "excite2", d2[2].out_channels, self.excite2.out_features)]
        for a, b, n_out, n_in in chain:
            if n_out != n_in:
                raise ShapeError(f"{a} produces {n_out} channels but {b} expects {n_in}")
        k, s, p = self.collapse.kernel, self.collapse.stride, self.collapse.padding
        if k[1:] != (1, 1) or s != (1, 1, 1) or p[1:] != (0, 0) or p[0] != k[0] - 1:
            raise ShapeError(f"collapse layer (kernel {k}, stride {s}, padding {p}) does not reduce depth to 1")

    @property
    def depth(self) -> int:
        return self.collapse.kernel[0]

    @classmethod
    def init(cls, config: MotionNetConfig = MotionNetConfig(), seed: int = 0) -> "MotionNetParams":
        rng = np.random.default_rng(seed)
        c = config

        def conv(i, o, k=3, s=1, p=1):
            return Conv3dSpec.init(i, o, k, s, p, rng=rng)

        return cls(
            down1=(conv(c.volume_channels, c.down1, s=2), conv(c.down1, c.down1)),
            down2=(conv(c.down1, c.down2, s=2), conv(c.down2, c.down2), conv(c.down2, c.down2, k=1, p=0)),
            up1=conv(c.down2, c.up1, k=4, s=2),
            up2=(conv(c.up1 + c.down1, c.up2, k=4, s=2), conv(c.up2, c.up2), conv(c.up2, c.up2)),
            excite1=Dense.init(c.guide2_channels, c.down1, rng),
            excite2=Dense.init(c.guide3_channels, c.down2, rng),
            collapse=Conv3dSpec.init(c.up2, c.out_channels, (c.depth, 1, 1), 1, (c.depth - 1, 0, 0), rng=rng),
        )

    def save(self, directory) -> None:
        save_layers(directory, self.named_layers(), header="motionnet v1")

    @classmethod
    def load(cls, directory) -> "MotionNetParams":
        layers = {layer.name: layer for layer in load_layers(directory)}
        expected = ["down1a", "down1b", "excite1", "down2a", "down2b", "down2c", "excite2",
                    "up1", "up2a", "up2b", "up2c", "collapse"]
        missing = [n for n in expected if n not in layers]
        if missing:
            raise ValueError(f"{directory}: manifest lacks layers {missing}")
        kinds = {n: k for n, k, _ in (
            (layer.name, layer.kind, None) for layer in layers.values())}
        for n in expected:
            want = "pointwise" if n.startswith("excite") else ("tconv3d" if n in ("up1", "up2a", "collapse") else "conv3d")
            if kinds[n] != want:
                raise ValueError(f"{directory}: layer {n} is {kinds[n]}, expected {want}")
        p = {n: layers[n].params for n in expected}
        return cls(down1=(p["down1a"], p["down1b"]),
                   down2=(p["down2a"], p["down2b"], p["down2c"]),
                   up1=p["up1"], up2=(p["up2a"], p["up2b"], p["up2c"]),
                   excite1=p["excite1"], excite2=p["excite2"], collapse=p["collapse"])


@dataclass
class MotionFeatures:
    data: np.ndarray  # [C, H, W]
    stride: int = FEATURE_STRIDE

    def __post_init__(self):
        if not np.isfinite(self.data).all():
            raise FloatingPointError("motion features contain non-finite values")


def guided_excitation(volume, guide, gate: Dense) -> np.ndarray:
    """Scale ``volume`` [C, D, H, W] by ``sigmoid(pointwise(guide))`` [C, H, W]."""
    volume = as_tensor(volume, 4, "volume")
    guide = as_tensor(guide, 3, "guide")
    if guide.shape[1:] != volume.shape[2:]:
        raise ShapeError(f"guide spatial dims {list(guide.shape[1:])} != volume spatial dims "
                         f"{list(volume.shape[2:])}")
    if gate.out_features != volume.shape[0]:
        raise ShapeError(f"gate produces {gate.out_features} channels, volume has {volume.shape[0]}")
    w = sigmoid(pointwise_conv2d(guide, gate.weights, gate.bias))
    return hadamard(volume, w)


def _layer(name, fn, x, spec, threads, act=True):
    try:
        y = fn(x, spec, threads)
    except ShapeError as exc:
        raise ShapeError(f"layer {name}: {exc}") from None
    return leaky_relu(y, SLOPE) if act else y


def forward(volume, f2, f3, params: MotionNetParams, threads: int | None = None) -> MotionFeatures:
    """Motion features [C_out, H, W] from a cost volume and the 1/2 and 1/4
    scale guide maps (relative to the volume)."""
    if isinstance(volume, CostVolume4D):
        x = volume.channel_major()
    else:
        x = as_tensor(volume, 4, "volume")
    c, d, h, w = x.shape
    if d % 4 or h % 4 or w % 4:
        raise ShapeError(f"volume dims {list(x.shape)}: depth, height and width must be divisible by 4")
    if d != params.depth:
        raise ShapeError(f"volume depth {d} != collapse kernel depth {params.depth}")

    x = _layer("down1a", conv3d, x, params.down1[0], threads)
    x = _layer("down1b", conv3d, x, params.down1[1], threads)
    try:
        skip = guided_excitation(x, f2, params.excite1)
    except ShapeError as exc:
        raise ShapeError(f"layer excite1: {exc}") from None
    x = _layer("down2a", conv3d, skip, params.down2[0], threads)
    x = _layer("down2b", conv3d, x, params.down2[1], threads)
    x = _layer("down2c", conv3d, x, params.down2[2], threads)
    try:
        x = guided_excitation(x, f3, params.excite2)
    except ShapeError as exc:
        raise ShapeError(f"layer excite2: {exc}") from None
    x = _layer("up1", transposed_conv3d, x, params.up1, threads)
    x = np.concatenate([x, skip], axis=0)
    x = _layer("up2a", transposed_conv3d, x, params.up2[0], threads)
    x = _layer("up2b", conv3d, x, params.up2[1], threads)
    x = _layer("up2c", conv3d, x, params.up2[2], threads)
    x = _layer("collapse", transposed_conv3d, x, params.collapse, threads, act=False)
    if x.shape[1] != 1:
        raise ShapeError(f"layer collapse: depth is {x.shape[1]}, expected 1")
    return MotionFeatures(np.ascontiguousarray(x[:, 0]))
