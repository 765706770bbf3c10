"""Named-layer weight directories.

A directory holds ``manifest.txt`` plus one CMFT file per array. Each
manifest line describes one layer in execution order::

    <name> <kind> key=value ...

with ``kind`` one of ``conv3d``, ``tconv3d``, ``pointwise`` and ``linear``.
Arrays are stored as ``<name>.weight.cmft`` and ``<name>.bias.cmft``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import cmft
from .tensor import Conv3dSpec

MANIFEST = "manifest.txt"
KINDS = ("conv3d", "tconv3d", "pointwise", "linear")


@dataclass
class Dense:
    """Weight matrix ``[out, in]`` and bias ``[out]`` (pointwise conv or linear)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float32)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"dense layer dims {list(self.weights.shape)} / bias {list(self.bias.shape)}")

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def init(cls, in_features, out_features, rng, zero_bias=True) -> "Dense":
        s = np.sqrt(1.0 / in_features)
        w = rng.uniform(-s, s, size=(out_features, in_features))
        b = np.zeros(out_features) if zero_bias else rng.uniform(-s, s, size=out_features)
        return cls(w, b)

    @classmethod
    def zeros(cls, in_features, out_features) -> "Dense":
        return cls(np.zeros((out_features, in_features)), np.zeros(out_features))


@dataclass
class Layer:
    name: str
    kind: str
    params: Conv3dSpec | Dense
    attrs: dict = field(default_factory=dict)


def _fmt(t) -> str:
    return ",".join(str(int(v)) for v in t)


def _parse_triple(s: str):
    vals = tuple(int(v) for v in s.split(","))
    if len(vals) != 3:
        raise ValueError(f"expected 3 comma-separated ints, got {s!r}")
    return vals


def save_layers(directory, layers: list[Layer], header: str = "") -> None:
    os.makedirs(directory, exist_ok=True)
    lines = [f"# {header}"] if header else []
    for layer in layers:
        p = layer.params
        extra = " ".join(f"{k}={v}" for k, v in layer.attrs.items())
        if layer.kind in ("conv3d", "tconv3d"):
            desc = (f"in={p.in_channels} out={p.out_channels} kernel={_fmt(p.kernel)} "
                    f"stride={_fmt(p.stride)} padding={_fmt(p.padding)}")
        else:
            desc = f"in={p.in_features} out={p.out_features}"
        lines.append(" ".join(x for x in (layer.name, layer.kind, desc, extra) if x))
        cmft.write(os.path.join(directory, f"{layer.name}.weight.cmft"), p.weights)
        cmft.write(os.path.join(directory, f"{layer.name}.bias.cmft"), p.bias)
    with open(os.path.join(directory, MANIFEST), "w") as f:
        f.write("\n".join(lines) + "\n")


def load_layers(directory) -> list[Layer]:
    path = os.path.join(directory, MANIFEST)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no {MANIFEST} in {directory}")
    layers = []
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) < 2 or tokens[1] not in KINDS:
                raise ValueError(f"{path}:{lineno}: expected '<name> <kind> key=value...', got {raw.strip()!r}")
            name, kind = tokens[:2]
            attrs = dict(t.split("=", 1) for t in tokens[2:])
            w = cmft.read(os.path.join(directory, f"{name}.weight.cmft"))
            b = cmft.read(os.path.join(directory, f"{name}.bias.cmft"))
            try:
                if kind in ("conv3d", "tconv3d"):
                    params = Conv3dSpec(int(attrs.pop("in")), int(attrs.pop("out")),
                                        _parse_triple(attrs.pop("kernel")),
                                        _parse_triple(attrs.pop("stride")),
                                        _parse_triple(attrs.pop("padding")), w, b)
                else:
                    n_in, n_out = int(attrs.pop("in")), int(attrs.pop("out"))
                    params = Dense(w, b)
                    if (params.in_features, params.out_features) != (n_in, n_out):
                        raise ValueError(f"arrays are {list(w.shape)}, manifest says in={n_in} out={n_out}")
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: layer {name}: {exc}") from None
            layers.append(Layer(name, kind, params, attrs))
    return layers
