"""Instance-activation-map decoder (forward only).

A pointwise convolution turns motion features into N maps; each map is
softmax-normalized over pixels and used to pool one instance feature vector
``z_n``. From ``z_n`` a linear head predicts a dynamic 1x1 mask kernel (the
mask is ``sigmoid(kernel . features)`` per pixel) and another predicts the
objectness score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import InstanceSet
from .tensor import ShapeError, as_tensor, pointwise_conv2d, sigmoid
from .weights import Dense, Layer, load_layers, save_layers

DEFAULT_MAPS = 32
DEFAULT_THRESHOLD = 0.5
DEFAULT_SCORE_FLOOR = 0.3


@dataclass
class DecoderParams:
    iam_conv: Dense  # [N, C]
    mask_kernel_head: Dense  # [C, C]
    objectness_head: Dense  # [1, C]

    def __post_init__(self):
        c = self.iam_conv.in_features
        if self.iam_conv.out_features < 1:
            raise ShapeError("decoder needs at least one activation map")
        if self.mask_kernel_head.in_features != c or self.mask_kernel_head.out_features != c:
            raise ShapeError(f"mask kernel head is {self.mask_kernel_head.out_features}x"
                             f"{self.mask_kernel_head.in_features}, expected {c}x{c}")
        if self.objectness_head.in_features != c or self.objectness_head.out_features != 1:
            raise ShapeError(f"objectness head is {self.objectness_head.out_features}x"
                             f"{self.objectness_head.in_features}, expected 1x{c}")

    @property
    def channels(self) -> int:
        return self.iam_conv.in_features

    @property
    def maps(self) -> int:
        return self.iam_conv.out_features

    @classmethod
    def init(cls, channels: int = 64, maps: int = DEFAULT_MAPS, seed: int = 0) -> "DecoderParams":
        rng = np.random.default_rng([seed, 0xDEC])
        return cls(Dense.init(channels, maps, rng), Dense.init(channels, channels, rng),
                   Dense.init(channels, 1, rng))

    @classmethod
    def zeros(cls, channels: int = 64, maps: int = DEFAULT_MAPS) -> "DecoderParams":
        return cls(Dense.zeros(channels, maps), Dense.zeros(channels, channels), Dense.zeros(channels, 1))

    def save(self, directory) -> None:
        save_layers(directory, [Layer("iam", "pointwise", self.iam_conv),
                                Layer("mask_kernel", "linear", self.mask_kernel_head),
                                Layer("objectness", "linear", self.objectness_head)],
                    header="decoder v1")

    @classmethod
    def load(cls, directory) -> "DecoderParams":
        layers = {layer.name: layer.params for layer in load_layers(directory)}
        try:
            return cls(layers["iam"], layers["mask_kernel"], layers["objectness"])
        except KeyError as exc:
            raise ValueError(f"{directory}: manifest lacks layer {exc.args[0]}") from None


@dataclass
class Prediction:
    soft_masks: np.ndarray  # [N, H, W]
    objectness: np.ndarray  # [N]
    maps: np.ndarray  # [N, H, W] normalized activation maps
    instance_features: np.ndarray  # [N, C]


def _features(features) -> np.ndarray:
    data = getattr(features, "data", features)
    return as_tensor(data, 3, "motion features")


def activation_maps(features, params: DecoderParams) -> np.ndarray:
    """[N, H, W] maps, each a softmax over all pixels (sums to 1)."""
    f = _features(features)
    if f.shape[0] != params.channels:
        raise ShapeError(f"features have {f.shape[0]} channels, decoder expects {params.channels}")
    logits = pointwise_conv2d(f, params.iam_conv.weights, params.iam_conv.bias).astype(np.float64)
    n = logits.shape[0]
    flat = logits.reshape(n, -1)
    flat = np.exp(flat - flat.max(axis=1, keepdims=True))
    flat /= flat.sum(axis=1, keepdims=True)
    return flat.reshape(logits.shape).astype(np.float32)


def predict(features, params: DecoderParams) -> Prediction:
    f = _features(features)
    maps = activation_maps(f, params)
    c, h, w = f.shape
    fm = f.reshape(c, -1).astype(np.float64)
    z = maps.reshape(maps.shape[0], -1).astype(np.float64) @ fm.T  # [N, C]
    kernels = z @ params.mask_kernel_head.weights.T.astype(np.float64) + params.mask_kernel_head.bias
    soft = sigmoid((kernels @ fm).reshape(-1, h, w))
    obj = sigmoid(z @ params.objectness_head.weights.T.astype(np.float64)
                  + params.objectness_head.bias)[:, 0]
    return Prediction(soft, obj, maps, z.astype(np.float32))


def binarize(pred: Prediction, threshold: float = DEFAULT_THRESHOLD,
             score_floor: float = DEFAULT_SCORE_FLOOR) -> InstanceSet:
    """Keep maps scoring at least ``score_floor`` whose mask (strictly above
    ``threshold``) is non-empty."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    masks, scores = [], []
    for soft, score in zip(pred.soft_masks, pred.objectness):
        m = soft > threshold
        if score >= score_floor and m.any():
            masks.append(m)
            scores.append(float(score))
    shape = pred.soft_masks.shape[1:]
    return InstanceSet(masks, scores, shape)


def decode(features, params: DecoderParams, threshold: float = DEFAULT_THRESHOLD,
           score_floor: float = DEFAULT_SCORE_FLOOR) -> InstanceSet:
    return binarize(predict(features, params), threshold, score_floor)
