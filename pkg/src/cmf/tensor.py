"""Dense float32 tensors and the forward kernels used by the network.

Tensors are plain C-contiguous ``numpy.float32`` arrays. Feature maps and
volumes are at most rank 4; convolution weights are rank 5
``[out, in, kd, kh, kw]``. Convolutions use cross-correlation semantics with
zero padding and dispatch to the compiled backend when available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend


class ShapeError(ValueError):
    """Raised when tensor dimensions are inconsistent with an operation."""


def as_tensor(a, ndim: int | None = None, name: str = "tensor") -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.float32)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name}: expected rank {ndim}, got shape {arr.shape}")
    if not 1 <= arr.ndim <= 5:
        raise ShapeError(f"{name}: rank must be 1..5, got {arr.ndim}")
    return arr


def _triple(v) -> tuple[int, int, int]:
    if np.isscalar(v):
        return (int(v),) * 3
    t = tuple(int(i) for i in v)
    if len(t) != 3:
        raise ValueError(f"expected 3 values, got {v!r}")
    return t


@dataclass
class Conv3dSpec:
    """Weights and geometry of one 3D convolution layer.

    ``weights`` has dims ``[out_channels, in_channels, kd, kh, kw]`` for both
    the forward and the transposed convolution.
    """

    in_channels: int
    out_channels: int
    kernel: tuple[int, int, int]
    stride: tuple[int, int, int]
    padding: tuple[int, int, int]
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.kernel = _triple(self.kernel)
        self.stride = _triple(self.stride)
        self.padding = _triple(self.padding)
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be positive")
        if min(self.kernel) < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ShapeError(f"bad kernel/stride/padding {self.kernel}/{self.stride}/{self.padding}")
        self.weights = as_tensor(self.weights, 5, "weights")
        self.bias = as_tensor(self.bias, 1, "bias")
        expected = (self.out_channels, self.in_channels) + self.kernel
        if self.weights.shape != expected:
            raise ShapeError(f"weights dims {list(self.weights.shape)} != {list(expected)}")
        if self.bias.shape != (self.out_channels,):
            raise ShapeError(f"bias dims {list(self.bias.shape)} != [{self.out_channels}]")

    @classmethod
    def init(cls, in_channels, out_channels, kernel, stride=1, padding=0, rng=None, zero_bias=True):
        """Uniform init in [-s, s] with s = sqrt(1 / fan_in)."""
        kernel = _triple(kernel)
        rng = np.random.default_rng(0) if rng is None else rng
        fan_in = in_channels * kernel[0] * kernel[1] * kernel[2]
        s = np.sqrt(1.0 / fan_in)
        w = rng.uniform(-s, s, size=(out_channels, in_channels) + kernel)
        b = np.zeros(out_channels) if zero_bias else rng.uniform(-s, s, size=out_channels)
        return cls(in_channels, out_channels, kernel, stride, padding, w, b)

    def conv_output_dims(self, dims):
        return tuple((n + 2 * p - k) // s + 1
                     for n, k, s, p in zip(dims, self.kernel, self.stride, self.padding))

    def transposed_output_dims(self, dims):
        return tuple((n - 1) * s - 2 * p + k
                     for n, k, s, p in zip(dims, self.kernel, self.stride, self.padding))


def _check_input(x, spec: Conv3dSpec, out_dims) -> np.ndarray:
    x = as_tensor(x, 4, "conv input")
    if x.shape[0] != spec.in_channels:
        raise ShapeError(f"input has {x.shape[0]} channels, layer expects {spec.in_channels} "
                         f"(input dims {list(x.shape)})")
    if min(out_dims) < 1:
        raise ShapeError(f"input dims {list(x.shape)} give non-positive output dims {list(out_dims)} "
                         f"for kernel {spec.kernel}, stride {spec.stride}, padding {spec.padding}")
    return x


def conv3d(x, spec: Conv3dSpec, threads: int | None = None) -> np.ndarray:
    """Cross-correlate ``x`` [C_in, D, H, W] with ``spec``; returns [C_out, D', H', W']."""
    out_dims = spec.conv_output_dims(np.shape(x)[1:]) if np.ndim(x) == 4 else (0,)
    x = _check_input(x, spec, out_dims)
    n = threads or _backend.threads()
    return _backend.kernels().conv3d(x, spec.weights, spec.bias, spec.stride, spec.padding, n)


def transposed_conv3d(x, spec: Conv3dSpec, threads: int | None = None) -> np.ndarray:
    """Adjoint of :func:`conv3d` in the spatial sense, plus bias.

    Output dims are ``(n - 1) * stride - 2 * padding + kernel`` per axis.
    """
    out_dims = spec.transposed_output_dims(np.shape(x)[1:]) if np.ndim(x) == 4 else (0,)
    x = _check_input(x, spec, out_dims)
    n = threads or _backend.threads()
    kern = _backend.kernels()
    if max(spec.kernel) > 256:
        from . import _pykernels as kern
    return kern.conv_transpose3d(x, spec.weights, spec.bias, spec.stride, spec.padding, n)


def pointwise_conv2d(x, weights, bias) -> np.ndarray:
    """Per-pixel linear map across channels: [C_in, H, W] -> [C_out, H, W]."""
    x = as_tensor(x, 3, "pointwise input")
    weights = np.asarray(weights)
    bias = np.asarray(bias)
    if weights.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ShapeError(f"pointwise weights {list(weights.shape)} do not match input channels {x.shape[0]}")
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"pointwise bias {list(bias.shape)} != [{weights.shape[0]}]")
    c, h, w = x.shape
    out = weights.astype(np.float64) @ x.reshape(c, -1).astype(np.float64)
    out += bias.astype(np.float64)[:, None]
    return out.reshape(-1, h, w).astype(np.float32)


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return out.astype(np.float32)


def hadamard(a, b) -> np.ndarray:
    """Elementwise product; ``b`` of dims [C, H, W] broadcasts over the depth
    axis of an ``a`` of dims [C, D, H, W]."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape == b.shape:
        return a * b
    if a.ndim == 4 and b.ndim == 3 and b.shape == (a.shape[0],) + a.shape[2:]:
        return a * b[:, None, :, :]
    raise ShapeError(f"cannot take hadamard product of dims {list(a.shape)} and {list(b.shape)}")


def leaky_relu(x, slope: float = 0.01) -> np.ndarray:
    x = as_tensor(x)
    return np.where(x >= 0, x, np.float32(slope) * x).astype(np.float32)
