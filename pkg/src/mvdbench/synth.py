"""Deterministic raycast renderer for multi-view samples with exact depth.

Surfaces are textured with 3-D value noise. Lattice values come from the
murmur3 64-bit finaliser applied to a linear mix of the lattice coordinates,
so a scene renders to the same bits everywhere:

    key = ix*0x9E3779B97F4A7C15 + iy*0xC2B2AE3D27D4EB4F + iz*0x165667B19E3779F9
          + seed*0x27D4EB2F165667C5 + channel*0xD6E8FEB86659FD93   (mod 2**64)
    fmix64(k): k ^= k>>33; k *= 0xFF51AFD7ED558CCD; k ^= k>>33;
               k *= 0xC4CEB9FE1A85EC53; k ^= k>>33
    value = (fmix64(key) >> 11) * 2**-53
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .data import Sample, View
from .geometry import GeometryError, Intrinsics, Pose, compose_pose, invert_pose

_MIX = (
    np.uint64(0x9E3779B97F4A7C15),
    np.uint64(0xC2B2AE3D27D4EB4F),
    np.uint64(0x165667B19E3779F9),
    np.uint64(0x27D4EB2F165667C5),
    np.uint64(0xD6E8FEB86659FD93),
)
_FMIX = (np.uint64(0xFF51AFD7ED558CCD), np.uint64(0xC4CEB9FE1A85EC53))


@dataclass(frozen=True)
class Plane:
    point: tuple
    normal: tuple


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float


Primitive = Union[Plane, Sphere]


@dataclass(frozen=True)
class Texture:
    seed: int = 0
    cell: float = 0.1  # lattice spacing of the coarsest octave, meters
    octaves: int = 3
    contrast: float = 0.8


@dataclass(frozen=True, eq=False)
class Camera:
    pose: Pose  # world -> camera
    intrinsics: Intrinsics
    width: int
    height: int


@dataclass(frozen=True, eq=False)
class SceneSpec:
    primitives: list
    cameras: list
    texture: Texture = field(default_factory=Texture)

    def validate(self) -> "SceneSpec":
        if not self.primitives:
            raise ValueError("scene needs at least one primitive")
        if len(self.cameras) < 2:
            raise ValueError("scene needs at least two cameras")
        for p in self.primitives:
            if isinstance(p, Plane) and abs(np.linalg.norm(p.normal) - 1.0) > 1e-9:
                raise ValueError(f"plane normal {p.normal} is not unit length")
            if isinstance(p, Sphere) and not p.radius > 0:
                raise ValueError("sphere radius must be positive")
        for c in self.cameras:
            k = c.intrinsics
            if not (k.fx > 0 and k.fy > 0) or c.width < 1 or c.height < 1:
                raise GeometryError("degenerate camera")
        return self


def fmix64(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.uint64)
    with np.errstate(over="ignore"):
        k = k ^ (k >> np.uint64(33))
        k = k * _FMIX[0]
        k = k ^ (k >> np.uint64(33))
        k = k * _FMIX[1]
        k = k ^ (k >> np.uint64(33))
    return k


def lattice_value(ix, iy, iz, seed: int, channel: int) -> np.ndarray:
    """Hash integer lattice coordinates to floats in [0, 1)."""
    c = [np.asarray(a, dtype=np.int64).astype(np.uint64) for a in (ix, iy, iz)]
    extra = np.array([seed, channel], dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        key = c[0] * _MIX[0] + c[1] * _MIX[1] + c[2] * _MIX[2] + extra[0] * _MIX[3] + extra[1] * _MIX[4]
    return (fmix64(key) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def value_noise(points: np.ndarray, tex: Texture, channel: int) -> np.ndarray:
    """Multi-octave trilinear value noise at world points (..., 3), in [0, 1)."""
    total = np.zeros(points.shape[:-1])
    norm = 0.0
    for o in range(tex.octaves):
        amp = 0.5**o
        p = points * (2.0**o / tex.cell)
        base = np.floor(p)
        f = p - base
        i = base.astype(np.int64)
        acc = np.zeros(total.shape)
        for dx in (0, 1):
            wx = f[..., 0] if dx else 1.0 - f[..., 0]
            for dy in (0, 1):
                wy = f[..., 1] if dy else 1.0 - f[..., 1]
                for dz in (0, 1):
                    wz = f[..., 2] if dz else 1.0 - f[..., 2]
                    val = lattice_value(i[..., 0] + dx, i[..., 1] + dy, i[..., 2] + dz, tex.seed * 131 + o, channel)
                    acc += wx * wy * wz * val
        total += amp * acc
        norm += amp
    return total / norm


def _intersect(prim: Primitive, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Ray parameter of the nearest forward hit, inf on a miss."""
    if isinstance(prim, Plane):
        n = np.asarray(prim.normal, dtype=np.float64)
        denom = dirs @ n
        num = float(n @ (np.asarray(prim.point, dtype=np.float64) - origin))
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = num / denom
        return np.where((denom != 0) & (lam > 0), lam, np.inf)
    oc = origin - np.asarray(prim.center, dtype=np.float64)
    a = np.einsum("...i,...i->...", dirs, dirs)
    b = 2.0 * (dirs @ oc)
    c = float(oc @ oc) - prim.radius**2
    disc = b * b - 4.0 * a * c
    sq = np.sqrt(np.maximum(disc, 0.0))
    near = (-b - sq) / (2.0 * a)
    far = (-b + sq) / (2.0 * a)
    lam = np.where(near > 0, near, far)
    return np.where((disc >= 0) & (lam > 0), lam, np.inf)


def render_view(spec: SceneSpec, cam: Camera):
    """Render one camera -> (image (H, W, 3) quantised to 1/255, depth (H, W) with 0 on misses)."""
    k = cam.intrinsics
    v, u = np.mgrid[0 : cam.height, 0 : cam.width].astype(np.float64)
    # z component is 1, so the ray parameter equals camera-frame depth
    d_cam = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)
    R = cam.pose.rotation
    origin = -R.T @ cam.pose.translation
    dirs = d_cam @ R  # R^T applied to each row vector
    best = np.full(u.shape, np.inf)
    for prim in spec.primitives:
        best = np.minimum(best, _intersect(prim, origin, dirs))
    hit = np.isfinite(best)
    lam = np.where(hit, best, 0.0)
    pts = origin + dirs * lam[..., None]
    tex = spec.texture
    img = np.zeros(u.shape + (3,))
    for ch in range(3):
        val = value_noise(pts, tex, ch)
        img[..., ch] = np.where(hit, 0.5 + tex.contrast * (val - 0.5), 0.0)
    img = np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
    return img, np.where(hit, lam, 0.0)


def render(spec: SceneSpec) -> Sample:
    """Render every camera; the first becomes the keyview with ground-truth depth."""
    spec.validate()
    key_cam = spec.cameras[0]
    key_img, key_depth = render_view(spec, key_cam)
    others = []
    for cam in spec.cameras[1:]:
        if (cam.width, cam.height) != (key_cam.width, key_cam.height):
            raise ValueError("all cameras must share the keyview resolution")
        img, _ = render_view(spec, cam)
        # view frame -> world -> keyview frame
        others.append(View(img, compose_pose(invert_pose(cam.pose), key_cam.pose), cam.intrinsics))
    return Sample(View(key_img, Pose.identity(), key_cam.intrinsics), others, key_depth.astype(np.float32))


def camera_at(center, intrinsics: Intrinsics, width: int, height: int, rotation=None) -> Camera:
    """Camera with world->camera pose for a given optical centre (and camera->world rotation)."""
    Rcw = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    R = Rcw.T
    return Camera(Pose(R, -R @ np.asarray(center, dtype=np.float64)), intrinsics, width, height)


def default_intrinsics(size: int, focal: float = 100.0) -> Intrinsics:
    c = (size - 1) / 2.0
    return Intrinsics(focal, focal, c, c)


def plane_scene(
    depth: float = 2.0,
    baseline: float = 0.2,
    size: int = 128,
    n_other: int = 1,
    focal: float = 100.0,
    texture: Texture = Texture(),
) -> SceneSpec:
    """Fronto-parallel plane ``z = depth`` seen by a keyview at the origin.

    Other cameras sit on the x axis at ``+b, -b, +2b, -2b, ...``.
    """
    k = default_intrinsics(size, focal)
    cams = [camera_at((0.0, 0.0, 0.0), k, size, size)]
    for i in range(n_other):
        step = (i // 2 + 1) * baseline * (1 if i % 2 == 0 else -1)
        cams.append(camera_at((step, 0.0, 0.0), k, size, size))
    return SceneSpec([Plane((0.0, 0.0, depth), (0.0, 0.0, 1.0))], cams, texture)


def _small_rotation(rng: np.random.Generator, max_angle: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = rng.uniform(-max_angle, max_angle)
    kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(ang) * kx + (1 - np.cos(ang)) * kx @ kx


def random_scene(seed: int, size: int = 96, n_other: int = 2, focal: float = None) -> SceneSpec:
    """A back plane plus a sphere in front of it, with jittered camera poses."""
    rng = np.random.default_rng(seed)
    focal = focal or 0.8 * size
    k = default_intrinsics(size, focal)
    back = float(rng.uniform(2.5, 4.0))
    tilt = _small_rotation(rng, 0.2) @ np.array([0.0, 0.0, 1.0])
    prims = [
        Plane((0.0, 0.0, back), tuple(tilt / np.linalg.norm(tilt))),
        Sphere((float(rng.uniform(-0.3, 0.3)), float(rng.uniform(-0.3, 0.3)), back * 0.6), float(rng.uniform(0.25, 0.45))),
    ]
    cams = [camera_at((0.0, 0.0, 0.0), k, size, size)]
    for _ in range(n_other):
        c = rng.uniform([-0.3, -0.15, -0.05], [0.3, 0.15, 0.05])
        cams.append(camera_at(c, k, size, size, _small_rotation(rng, 0.03)))
    return SceneSpec(prims, cams, Texture(seed=int(seed), cell=0.08 * back / 2.0))
