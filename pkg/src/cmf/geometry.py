"""Pinhole cameras, rigid poses and plane-sweep warping.

Conventions: pixel (u, v) sits at continuous coordinate (u, v); the pose
passed to the warping functions maps target-camera points into the source
camera (``p_src = R @ p_tgt + t``), i.e. it is T_{t->t-1} when the previous
frame is the source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .kvfile import format_kv, parse_floats, read_kv
from .tensor import ShapeError, as_tensor


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dims must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, ratio: float, width: int | None = None, height: int | None = None) -> "Intrinsics":
        """Intrinsics for a map at ``ratio`` times this resolution.

        fx, fy, cx, cy are all multiplied by ``ratio``; pixel (u, v) of the
        scaled map corresponds to (u / ratio, v / ratio) here.
        """
        w = width if width is not None else int(round(self.width * ratio))
        h = height if height is not None else int(round(self.height * ratio))
        return Intrinsics(self.fx * ratio, self.fy * ratio, self.cx * ratio, self.cy * ratio, w, h)


@dataclass(frozen=True)
class RigidPose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6, rtol=0):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise ValueError("rotation determinant is not +1")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_values(cls, values) -> "RigidPose":
        """12 floats: row-major 3x3 rotation followed by the translation."""
        v = np.asarray(values, dtype=np.float64).ravel()
        if v.size != 12:
            raise ValueError(f"pose needs 12 values, got {v.size}")
        return cls(v[:9].reshape(3, 3), v[9:])

    def values(self) -> list[float]:
        return [float(x) for x in np.concatenate([self.rotation.ravel(), self.translation])]

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(3)) and not self.translation.any())

    def inverse(self) -> "RigidPose":
        rt = self.rotation.T
        return RigidPose(rt, -rt @ self.translation)

    def compose(self, other: "RigidPose") -> "RigidPose":
        """``self`` after ``other``."""
        return RigidPose(self.rotation @ other.rotation,
                         self.rotation @ other.translation + self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for ``angle`` radians about ``axis``."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)


@dataclass
class SampleGrid:
    """Source-frame sampling coordinates for every target pixel."""

    x: np.ndarray
    y: np.ndarray
    valid: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape


def _project(depths: np.ndarray, pose: RigidPose, k: Intrinsics):
    depths = np.asarray(depths, dtype=np.float64).reshape(-1, 1, 1)
    v, u = np.mgrid[0:k.height, 0:k.width].astype(np.float64)
    if pose.is_identity():
        shape = (depths.shape[0], k.height, k.width)
        return (np.broadcast_to(u, shape).copy(), np.broadcast_to(v, shape).copy(),
                np.ones(shape, dtype=bool))
    rx = (u - k.cx) / k.fx
    ry = (v - k.cy) / k.fy
    r, t = pose.rotation, pose.translation
    xs = depths * (r[0, 0] * rx + r[0, 1] * ry + r[0, 2]) + t[0]
    ys = depths * (r[1, 0] * rx + r[1, 1] * ry + r[1, 2]) + t[1]
    zs = depths * (r[2, 0] * rx + r[2, 1] * ry + r[2, 2]) + t[2]
    front = zs > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        gx = np.where(front, k.fx * xs / zs + k.cx, np.nan)
        gy = np.where(front, k.fy * ys / zs + k.cy, np.nan)
    inside = front & (gx >= 0) & (gx <= k.width - 1) & (gy >= 0) & (gy <= k.height - 1)
    return gx, gy, inside


def project_plane(depth: float, pose: RigidPose, intrinsics: Intrinsics) -> SampleGrid:
    """Where each target pixel, assumed to lie at ``depth``, lands in the source."""
    if not depth > 0:
        raise ValueError(f"depth must be positive, got {depth}")
    gx, gy, valid = _project([depth], pose, intrinsics)
    return SampleGrid(gx[0], gy[0], valid[0])


def project_planes(depths, pose: RigidPose, intrinsics: Intrinsics):
    """Vectorized :func:`project_plane` over a depth list; arrays are [D, H, W]."""
    depths = np.asarray(depths, dtype=np.float64)
    if depths.size == 0:
        raise ValueError("no depth planes given")
    if not (depths > 0).all():
        raise ValueError("depths must be positive")
    return _project(depths, pose, intrinsics)


def bilinear_sample(source, grid: SampleGrid, threads: int | None = None) -> np.ndarray:
    """Sample ``source`` [C, H, W] at the grid; invalid entries give 0.0."""
    source = as_tensor(source, 3, "source")
    if grid.shape != source.shape[1:]:
        raise ShapeError(f"grid dims {list(grid.shape)} != source spatial dims {list(source.shape[1:])}")
    gx = np.ascontiguousarray(np.nan_to_num(grid.x), dtype=np.float64)
    gy = np.ascontiguousarray(np.nan_to_num(grid.y), dtype=np.float64)
    valid = np.ascontiguousarray(grid.valid, dtype=np.uint8)
    _, h, w = source.shape
    # the kernels trust valid coordinates to be in bounds
    valid &= ((gx >= 0) & (gx <= w - 1) & (gy >= 0) & (gy <= h - 1)).astype(np.uint8)
    n = threads or _backend.threads()
    return _backend.kernels().bilinear_sample(source, gx, gy, valid, n)


def warp_feature_plane(source, depth: float, pose: RigidPose, intrinsics: Intrinsics,
                       threads: int | None = None) -> np.ndarray:
    source = as_tensor(source, 3, "source")
    if (intrinsics.height, intrinsics.width) != source.shape[1:]:
        raise ShapeError(f"intrinsics are for {intrinsics.width}x{intrinsics.height}, "
                         f"source is {source.shape[2]}x{source.shape[1]}")
    return bilinear_sample(source, project_plane(depth, pose, intrinsics), threads)


def load_camera(path) -> tuple[Intrinsics, RigidPose]:
    """Read ``fx, fy, cx, cy, width, height`` and ``pose`` (12 floats) from a key=value file.

    A missing pose means identity.
    """
    kv = read_kv(path)
    try:
        k = Intrinsics(float(kv["fx"]), float(kv["fy"]), float(kv["cx"]), float(kv["cy"]),
                       int(kv["width"]), int(kv["height"]))
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc.args[0]}") from None
    pose = RigidPose.from_values(parse_floats(kv["pose"])) if "pose" in kv else RigidPose.identity()
    return k, pose


def save_camera(path, intrinsics: Intrinsics, pose: RigidPose) -> None:
    items = {
        "fx": intrinsics.fx, "fy": intrinsics.fy, "cx": intrinsics.cx, "cy": intrinsics.cy,
        "width": intrinsics.width, "height": intrinsics.height,
        "pose": " ".join(repr(v) for v in pose.values()),
    }
    with open(path, "w") as f:
        f.write("# pose maps target (t) camera points into the source (t-1) camera: p_src = R p_tgt + t\n")
        f.write(format_kv(items))
