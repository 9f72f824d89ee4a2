"""Rigid poses, pinhole intrinsics, plane-induced homographies and bilinear warping.

Conventions:
    * A pose labelled A->B maps points as ``x_B = R @ x_A + t``.
    * Pixel centres sit at integer coordinates with the origin at the
      top-left pixel; ``u`` runs along columns, ``v`` along rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

ORTHO_TOL = 1e-6


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise GeometryError("pose entries must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_TOL:
            raise GeometryError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_TOL:
            raise GeometryError("rotation determinant is not +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        """Build from a 3x4 or 4x4 homogeneous matrix."""
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (..., 3) array of points."""
        return np.asarray(points) @ self.rotation.T + self.translation

    def scaled(self, s: float) -> "Pose":
        return Pose(self.rotation, self.translation * s)

    def is_identity(self, tol: float = 1e-9) -> bool:
        return bool(
            np.max(np.abs(self.rotation - np.eye(3))) <= tol
            and np.max(np.abs(self.translation)) <= tol
        )


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise GeometryError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def inverse_matrix(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def as_list(self) -> list[float]:
        return [float(self.fx), float(self.fy), float(self.cx), float(self.cy)]


def invert_pose(p: Pose) -> Pose:
    Rt = p.rotation.T
    return Pose(Rt, -Rt @ p.translation)


def compose_pose(a: Pose, b: Pose) -> Pose:
    """Chain ``a`` (A->B) then ``b`` (B->C) into A->C."""
    return Pose(b.rotation @ a.rotation, b.rotation @ a.translation + b.translation)


def plane_sweep_homography(
    k_key: Intrinsics, k_other: Intrinsics, pose_key_to_other: Pose, inv_depth: float
) -> np.ndarray:
    """Homography of the keyview-frame plane ``z = 1 / inv_depth``.

    Maps homogeneous keyview pixels to other-view pixels:
    ``H = K_other (R + t n^T inv_depth) K_key^-1`` with ``n = (0, 0, 1)``.
    ``inv_depth = 0`` gives the plane at infinity.
    """
    if not (np.isfinite(inv_depth) and inv_depth >= 0):
        raise GeometryError(f"inverse depth must be finite and >= 0, got {inv_depth}")
    M = pose_key_to_other.rotation.copy()
    M[:, 2] += pose_key_to_other.translation * inv_depth
    return k_other.matrix() @ M @ k_key.inverse_matrix()


def backproject(k: Intrinsics, u, v, depth):
    """Pixel coordinates plus camera-frame z depth -> camera-frame points."""
    u, v, depth = np.broadcast_arrays(
        np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64), np.asarray(depth, dtype=np.float64)
    )
    x = (u - k.cx) / k.fx * depth
    y = (v - k.cy) / k.fy * depth
    return np.stack([x, y, depth], axis=-1)


def project(k: Intrinsics, points: np.ndarray):
    """Camera-frame points -> (u, v, z)."""
    p = np.asarray(points, dtype=np.float64)
    z = p[..., 2]
    return k.fx * p[..., 0] / z + k.cx, k.fy * p[..., 1] / z + k.cy, z


def warp_bilinear(img: np.ndarray, h: np.ndarray, out_w: int, out_h: int):
    """Sample ``img`` at ``h @ (u, v, 1)`` for every output pixel.

    Returns ``(warped, valid)``. Output pixels whose source falls outside
    ``[0, W-1] x [0, H-1]`` (or behind the source camera) are invalid and 0.
    Accepts single-channel ``(H, W)`` or multi-channel ``(H, W, C)`` images.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.size == 0:
        raise GeometryError("cannot warp an empty image")
    squeeze = img.ndim == 2
    chw = img[None] if squeeze else np.moveaxis(img, -1, 0)
    hs = np.asarray(h, dtype=np.float64).reshape(1, 3, 3)
    out = np.empty((chw.shape[0], out_h, out_w))
    valid = None
    for c in range(chw.shape[0]):
        w_c, valid_c = kernels.warp_stack(np.ascontiguousarray(chw[c]), hs, out_h, out_w)
        out[c] = w_c[0]
        valid = valid_c[0]
    if squeeze:
        return out[0], valid
    return np.moveaxis(out, 0, -1), valid
