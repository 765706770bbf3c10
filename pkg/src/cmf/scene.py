"""Synthetic two-frame scenes with exact geometry.

Every surface is a fronto-parallel rectangle (the background is an unbounded
plane) carrying a smooth sinusoidal texture. Texture coordinates are target
image pixels at time t, so the target frame is a direct evaluation and the
previous frame is ray-cast through the known camera motion. Static surfaces
therefore satisfy the reprojection relation exactly; movers are displaced by
their per-frame velocity before casting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Intrinsics, RigidPose, rotation_about
from .kvfile import format_kv, parse_floats, read_kv

N_WAVES = 4


@dataclass(frozen=True)
class SceneObject:
    """Rectangle ``[x0, x1] x [y0, y1]`` in target pixels at time t."""

    x0: float
    y0: float
    x1: float
    y1: float
    depth: float
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    texture_seed: int = 0

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(f"empty rectangle ({self.x0}, {self.y0})-({self.x1}, {self.y1})")
        if not self.depth > 0:
            raise ValueError(f"object depth must be positive, got {self.depth}")
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        if len(self.velocity) != 3:
            raise ValueError("velocity needs 3 components")

    @property
    def moving(self) -> bool:
        return any(v != 0.0 for v in self.velocity)

    def values(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1, self.depth, *self.velocity, self.texture_seed]

    @classmethod
    def from_values(cls, v) -> "SceneObject":
        if len(v) != 9:
            raise ValueError(f"object needs 9 values (x0 y0 x1 y1 depth vx vy vz seed), got {len(v)}")
        return cls(v[0], v[1], v[2], v[3], v[4], (v[5], v[6], v[7]), int(v[8]))


@dataclass(frozen=True)
class SceneSpec:
    intrinsics: Intrinsics
    pose: RigidPose = field(default_factory=RigidPose.identity)
    background_depth: float = 3.0
    objects: tuple[SceneObject, ...] = ()
    depth_limits: tuple[float, float] = (0.05, 1000.0)
    contrast: float = 0.4
    periods: tuple[float, float] = (24.0, 64.0)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        lo, hi = self.depth_limits
        if not 0 < lo < hi:
            raise ValueError(f"bad depth limits {self.depth_limits}")
        if not lo <= self.background_depth <= hi:
            raise ValueError(f"background depth {self.background_depth} outside {self.depth_limits}")
        for i, ob in enumerate(self.objects):
            if not lo <= ob.depth <= hi:
                raise ValueError(f"object {i} depth {ob.depth} outside {self.depth_limits}")
            if not ob.depth < self.background_depth:
                raise ValueError(f"object {i} at depth {ob.depth} is not in front of the background")
            if ob.moving and not lo <= ob.depth - ob.velocity[2] <= hi:
                raise ValueError(f"object {i} leaves the depth limits at t-1")
        if not 0 < self.contrast <= 0.5:
            raise ValueError("contrast must be in (0, 0.5]")
        if not 0 < self.periods[0] <= self.periods[1]:
            raise ValueError(f"bad texture periods {self.periods}")

    @property
    def width(self) -> int:
        return self.intrinsics.width

    @property
    def height(self) -> int:
        return self.intrinsics.height


@dataclass
class SceneBundle:
    frame_prev: np.ndarray  # [3, H, W] in [0, 1]
    frame_next: np.ndarray
    depth_next: np.ndarray  # [H, W]
    pose: RigidPose  # target (t) camera -> source (t-1) camera
    intrinsics: Intrinsics
    motion_masks: list[np.ndarray]
    surface_next: np.ndarray  # [H, W] int: 0 background, k for object k-1
    covisible: np.ndarray  # [H, W] bool: static, in view and unoccluded at t-1

    @property
    def motion_union(self) -> np.ndarray:
        out = np.zeros(self.depth_next.shape, dtype=bool)
        for m in self.motion_masks:
            out |= m
        return out


class _Texture:
    def __init__(self, seed: int, contrast: float, periods):
        rng = np.random.default_rng([seed, 0x7E7])
        amps = rng.uniform(0.5, 1.0, size=(3, N_WAVES))
        self.amp = contrast * amps / amps.sum(axis=1, keepdims=True)
        theta = rng.uniform(0.0, np.pi, size=(3, N_WAVES))
        period = rng.uniform(periods[0], periods[1], size=(3, N_WAVES))
        self.kx = 2 * np.pi * np.cos(theta) / period
        self.ky = 2 * np.pi * np.sin(theta) / period
        self.phase = rng.uniform(0.0, 2 * np.pi, size=(3, N_WAVES))

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        out = np.full((3,) + x.shape, 0.5)
        for c in range(3):
            for i in range(N_WAVES):
                out[c] += self.amp[c, i] * np.sin(self.kx[c, i] * x + self.ky[c, i] * y + self.phase[c, i])
        return np.clip(out, 0.0, 1.0)


def _textures(spec: SceneSpec, seed: int):
    bg = _Texture(seed, spec.contrast, spec.periods)
    return bg, [_Texture(ob.texture_seed * 1_000_003 + seed + 1, spec.contrast, spec.periods)
                for ob in spec.objects]


def _render_next(spec: SceneSpec, bg, tex):
    k = spec.intrinsics
    v, u = np.mgrid[0:k.height, 0:k.width].astype(np.float64)
    depth = np.full(u.shape, spec.background_depth)
    surface = np.zeros(u.shape, dtype=np.int64)
    for i, ob in enumerate(spec.objects):
        inside = (u >= ob.x0) & (u <= ob.x1) & (v >= ob.y0) & (v <= ob.y1) & (ob.depth < depth)
        depth[inside] = ob.depth
        surface[inside] = i + 1
    img = bg(u, v)
    for i in range(len(spec.objects)):
        sel = surface == i + 1
        if sel.any():
            img[:, sel] = tex[i](u[sel], v[sel])
    return img, depth, surface


def _cast(spec: SceneSpec, tex_bg, tex, u, v):
    """Cast source-camera rays through pixel coordinates (u, v) into the
    target-frame scene at time t-1; returns colors and the hit surface id
    (-1 for no hit)."""
    k = spec.intrinsics
    r, t = spec.pose.rotation, spec.pose.translation
    rays = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)
    dirs = rays @ r  # rows are R^T r_s
    origin = -(r.T @ t)  # source camera centre in target coordinates

    def hit_point(plane_z, shift):
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = (plane_z - origin[2]) / dirs[..., 2]
            pts = origin + lam[..., None] * dirs + shift
            x = k.fx * pts[..., 0] / pts[..., 2] + k.cx
            y = k.fy * pts[..., 1] / pts[..., 2] + k.cy
        return lam, x, y

    lam, x, y = hit_point(spec.background_depth, np.zeros(3))
    hit = np.isfinite(lam) & (lam > 0)
    best = np.where(hit, lam, np.inf)
    surface = np.where(hit, 0, -1)
    img = np.full((3,) + u.shape, 0.5)
    img[:, hit] = tex_bg(x[hit], y[hit])
    for i, ob in enumerate(spec.objects):
        vel = np.array(ob.velocity)
        lam, x, y = hit_point(ob.depth - vel[2], vel)
        with np.errstate(invalid="ignore"):
            hit = (np.isfinite(lam) & (lam > 0) & (lam < best)
                   & (x >= ob.x0) & (x <= ob.x1) & (y >= ob.y0) & (y <= ob.y1))
        if hit.any():
            best[hit] = lam[hit]
            surface[hit] = i + 1
            img[:, hit] = tex[i](x[hit], y[hit])
    return img, surface


def _covisible(spec: SceneSpec, tex_bg, tex, depth, surface):
    """Target pixels whose surface point is in view, unoccluded and static
    in the previous frame."""
    k = spec.intrinsics
    v, u = np.mgrid[0:k.height, 0:k.width].astype(np.float64)
    pts = np.stack([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth.astype(np.float64)], axis=-1)
    src = spec.pose.apply(pts)
    front = src[..., 2] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = np.where(front, k.fx * src[..., 0] / src[..., 2] + k.cx, -1.0)
        ys = np.where(front, k.fy * src[..., 1] / src[..., 2] + k.cy, -1.0)
    inside = front & (xs >= 0) & (xs <= k.width - 1) & (ys >= 0) & (ys <= k.height - 1)
    _, seen = _cast(spec, tex_bg, tex, xs, ys)
    moving = np.zeros(surface.shape, dtype=bool)
    for i, ob in enumerate(spec.objects):
        if ob.moving:
            moving |= surface == i + 1
    return inside & (seen == surface) & ~moving


def generate(spec: SceneSpec, seed: int = 0) -> SceneBundle:
    bg, tex = _textures(spec, seed)
    frame_next, depth, surface = _render_next(spec, bg, tex)
    if spec.pose.is_identity() and not any(ob.moving for ob in spec.objects):
        frame_prev = frame_next.copy()
    else:
        k = spec.intrinsics
        v, u = np.mgrid[0:k.height, 0:k.width].astype(np.float64)
        frame_prev, _ = _cast(spec, bg, tex, u, v)
    covisible = _covisible(spec, bg, tex, depth, surface)
    masks = [surface == i + 1 for i, ob in enumerate(spec.objects) if ob.moving]
    masks = [m for m in masks if m.any()]
    return SceneBundle(frame_prev.astype(np.float32), frame_next.astype(np.float32),
                       depth.astype(np.float32), spec.pose, spec.intrinsics, masks, surface,
                       covisible)


def evaluation_mask(bundle: SceneBundle, margin: int = 8, texture_floor: float = 0.1) -> np.ndarray:
    """Target pixels with a trustworthy single-surface match.

    A pixel qualifies when every pixel within ``margin`` of it is covisible
    and lies on its surface (so finite-support features see one plane), and
    its smoothed color gradient is at least ``texture_floor`` times the
    frame median.
    """
    surf = bundle.surface_next
    h, w = surf.shape
    size = 2 * margin + 1
    same = np.ones((h, w), dtype=bool)
    cov = np.ones((h, w), dtype=bool)
    sp = np.pad(surf, margin, mode="edge")
    cp = np.pad(bundle.covisible, margin, constant_values=False)
    for dy in range(size):
        for dx in range(size):
            same &= sp[dy:dy + h, dx:dx + w] == surf
            cov &= cp[dy:dy + h, dx:dx + w]
    img = bundle.frame_next.astype(np.float64)
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, :, 1:-1] = 0.5 * (img[:, :, 2:] - img[:, :, :-2])
    gy[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
    mag = np.sqrt(gx ** 2 + gy ** 2).sum(axis=0)
    textured = mag >= texture_floor * np.median(mag)
    return same & cov & textured


def default_intrinsics(width: int, height: int, focal_ratio: float = 0.75) -> Intrinsics:
    f = focal_ratio * width
    return Intrinsics(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height)


def random_spec(seed: int, width: int = 384, height: int = 128, movers: int = 0,
                statics: int = 2, depth_band: tuple[float, float] = (1.0, 4.0),
                baseline: float = 0.35, periods: tuple[float, float] = (96.0, 256.0)) -> SceneSpec:
    """A seeded driving-like scene: mostly lateral camera motion, a background
    plane in the nearer half of ``depth_band`` and rectangles in front of it."""
    rng = np.random.default_rng([seed, 0x5CE])
    k = default_intrinsics(width, height)
    lo, hi = depth_band
    yaw = rng.uniform(-0.01, 0.01)
    direction = np.array([1.0, rng.uniform(-0.1, 0.1), rng.uniform(-0.2, 0.2)])
    pose = RigidPose(rotation_about([0, 1, 0], yaw), baseline * direction / np.linalg.norm(direction))
    bg_depth = rng.uniform(lo + 0.25 * (hi - lo), lo + 0.4 * (hi - lo))
    objects = []
    for i in range(statics + movers):
        w = rng.uniform(0.12, 0.25) * width
        h = rng.uniform(0.3, 0.6) * height
        x0 = rng.uniform(0.05 * width, 0.95 * width - w)
        y0 = rng.uniform(0.1 * height, 0.9 * height - h)
        depth = rng.uniform(lo + 0.05 * (hi - lo), bg_depth - 0.1 * (hi - lo))
        vel = (0.0, 0.0, 0.0)
        if i >= statics:
            speed = rng.uniform(0.5, 1.0) * baseline
            vel = (speed * rng.choice([-1.0, 1.0]), 0.0, rng.uniform(-0.3, 0.3) * speed)
        objects.append(SceneObject(x0, y0, x0 + w, y0 + h, depth, vel, int(rng.integers(1 << 30))))
    return SceneSpec(k, pose, bg_depth, tuple(objects), depth_limits=(0.5 * lo, 2.0 * hi),
                     periods=periods)


def load_spec(path) -> SceneSpec:
    """Read a key=value scene file.

    Keys: ``width height fx fy cx cy`` (fx/fy/cx/cy default to a 0.75 focal
    ratio and a centred principal point), ``pose`` (12 floats, target to
    source), ``background_depth``, ``depth_limits``, ``contrast``,
    ``periods``, and ``object<N>`` lines of ``x0 y0 x1 y1 depth vx vy vz seed``.
    """
    kv = read_kv(path)
    try:
        width, height = int(kv["width"]), int(kv["height"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc.args[0]}") from None
    base = default_intrinsics(width, height)
    k = Intrinsics(float(kv.get("fx", base.fx)), float(kv.get("fy", base.fy)),
                   float(kv.get("cx", base.cx)), float(kv.get("cy", base.cy)), width, height)
    pose = RigidPose.from_values(parse_floats(kv["pose"])) if "pose" in kv else RigidPose.identity()
    objects = []
    for key in sorted((k_ for k_ in kv if k_.startswith("object")), key=lambda s: int(s[6:] or 0)):
        objects.append(SceneObject.from_values(parse_floats(kv[key])))
    kwargs = {}
    if "background_depth" in kv:
        kwargs["background_depth"] = float(kv["background_depth"])
    if "depth_limits" in kv:
        kwargs["depth_limits"] = tuple(parse_floats(kv["depth_limits"]))
    if "contrast" in kv:
        kwargs["contrast"] = float(kv["contrast"])
    if "periods" in kv:
        kwargs["periods"] = tuple(parse_floats(kv["periods"]))
    return SceneSpec(k, pose, objects=tuple(objects), **kwargs)


def save_spec(path, spec: SceneSpec) -> None:
    k = spec.intrinsics
    items = {
        "width": k.width, "height": k.height, "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
        "pose": " ".join(repr(v) for v in spec.pose.values()),
        "background_depth": spec.background_depth,
        "depth_limits": f"{spec.depth_limits[0]!r} {spec.depth_limits[1]!r}",
        "contrast": spec.contrast,
        "periods": f"{spec.periods[0]!r} {spec.periods[1]!r}",
    }
    for i, ob in enumerate(spec.objects):
        items[f"object{i}"] = " ".join(repr(float(v)) for v in ob.values()[:-1]) + f" {ob.texture_seed}"
    with open(path, "w") as f:
        f.write(format_kv(items))


__all__ = ["SceneObject", "SceneSpec", "SceneBundle", "generate", "random_spec",
           "default_intrinsics", "evaluation_mask", "load_spec", "save_spec"]
