"""Views, samples, inverse-depth helpers and the dataset manifest.

A manifest is a JSON document::

    {"samples": [
        {"id": "scene0",                        # optional, defaults to the index
         "key_image": "key.ppm",
         "key_depth": "key_depth.pfm",
         "key_intrinsics": [fx, fy, cx, cy],
         "gt_range": [d_min, d_max],            # optional, meters
         "views": [{"image": "v1.ppm",
                    "pose_3x4_row_major": [12 numbers],   # view frame -> keyview frame
                    "intrinsics": [fx, fy, cx, cy]}]}]}

Relative paths resolve against the manifest's directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import GeometryError, Intrinsics, Pose
from .io import read_pfm, read_ppm

MANIFEST_POSE_TOL = 1e-4


class SampleError(ValueError):
    """A sample or manifest entry violates the data model."""


def valid_depth_mask(depth: np.ndarray) -> np.ndarray:
    depth = np.asarray(depth)
    return np.isfinite(depth) & (depth > 0)


def depth_to_inverse(depth: np.ndarray) -> np.ndarray:
    """Reciprocal on valid pixels; invalid pixels map to 0."""
    depth = np.asarray(depth, dtype=np.float64)
    ok = valid_depth_mask(depth)
    out = np.zeros_like(depth)
    out[ok] = 1.0 / depth[ok]
    return out


# the map is its own inverse under the shared invalid encoding
inverse_to_depth = depth_to_inverse


@dataclass(frozen=True, eq=False)
class View:
    image: np.ndarray
    pose: Pose
    intrinsics: Intrinsics

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    def gray(self) -> np.ndarray:
        img = np.asarray(self.image, dtype=np.float64)
        return img if img.ndim == 2 else img.mean(axis=-1)


@dataclass(frozen=True, eq=False)
class Sample:
    keyview: View
    others: list
    gt_depth: np.ndarray
    gt_range: Optional[tuple] = None
    name: str = field(default="0")

    def validate(self, min_size: int = 1) -> "Sample":
        if not self.keyview.pose.is_identity(1e-9):
            raise SampleError(f"sample {self.name}: keyview pose must be the identity")
        if len(self.others) < 1:
            raise SampleError(f"sample {self.name}: needs at least one other view")
        for v in (self.keyview, *self.others):
            img = np.asarray(v.image)
            if img.ndim not in (2, 3) or img.shape[0] < min_size or img.shape[1] < min_size:
                raise SampleError(f"sample {self.name}: image of shape {img.shape} too small")
        if np.shape(self.gt_depth) != self.keyview.image.shape[:2]:
            raise SampleError(
                f"sample {self.name}: gt depth shape {np.shape(self.gt_depth)} does not match "
                f"keyview image {self.keyview.image.shape[:2]}"
            )
        if self.gt_range is not None:
            lo, hi = self.gt_range
            if not (np.isfinite(lo) and np.isfinite(hi) and 0 < lo <= hi):
                raise SampleError(f"sample {self.name}: invalid gt_range {self.gt_range}")
        return self

    def with_views(self, indices) -> "Sample":
        """Sub-sample keeping the given 1-based other-view indices, in that order."""
        return replace(self, others=[self.others[i - 1] for i in indices])

    def depth_range(self) -> tuple[float, float]:
        """``gt_range`` if present, else min/max of the valid ground truth."""
        if self.gt_range is not None:
            return float(self.gt_range[0]), float(self.gt_range[1])
        d = np.asarray(self.gt_depth, dtype=np.float64)
        ok = valid_depth_mask(d)
        if not ok.any():
            raise SampleError(f"sample {self.name}: no valid ground truth to derive a range from")
        return float(d[ok].min()), float(d[ok].max())


def _pose_from_manifest(values, where: str) -> Pose:
    m = np.asarray(values, dtype=np.float64)
    if m.size != 12:
        raise SampleError(f"{where}: pose must have 12 entries, got {m.size}")
    m = m.reshape(3, 4)
    if not np.all(np.isfinite(m)):
        raise SampleError(f"{where}: pose has non-finite entries")
    R = m[:, :3]
    if np.max(np.abs(R.T @ R - np.eye(3))) > MANIFEST_POSE_TOL or abs(np.linalg.det(R) - 1) > MANIFEST_POSE_TOL:
        raise SampleError(f"{where}: rotation is not orthonormal within {MANIFEST_POSE_TOL}")
    # snap to the nearest rotation so the stricter in-memory invariant holds
    U, _, Vt = np.linalg.svd(R)
    return Pose(U @ Vt, m[:, 3])


def _intrinsics_from_manifest(values, where: str) -> Intrinsics:
    vals = list(values) if values is not None else []
    if len(vals) != 4:
        raise SampleError(f"{where}: intrinsics must be [fx, fy, cx, cy]")
    try:
        return Intrinsics(*(float(v) for v in vals))
    except GeometryError as exc:
        raise SampleError(f"{where}: {exc}") from None


class Manifest:
    """Parsed manifest; samples are loaded lazily by index."""

    def __init__(self, entries: list, root: Path):
        self.entries = entries
        self.root = Path(root)

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise SampleError(f"manifest not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise SampleError(f"{path}: not valid JSON: {exc}") from None
        if not isinstance(doc, dict) or not isinstance(doc.get("samples"), list):
            raise SampleError(f"{path}: expected an object with a 'samples' list")
        return cls(doc["samples"], path.parent)

    def __len__(self) -> int:
        return len(self.entries)

    def sample_id(self, index: int) -> str:
        return str(self.entries[index].get("id", index))

    def _path(self, rel, where: str) -> Path:
        if not isinstance(rel, str):
            raise SampleError(f"{where}: missing file path")
        p = Path(rel)
        p = p if p.is_absolute() else self.root / p
        if not p.is_file():
            raise SampleError(f"{where}: file not found: {p}")
        return p

    def load_sample(self, index: int) -> Sample:
        if not 0 <= index < len(self.entries):
            raise IndexError(f"sample index {index} out of range (0..{len(self.entries) - 1})")
        e = self.entries[index]
        sid = self.sample_id(index)
        where = f"sample {sid}"
        try:
            key_img = read_ppm(self._path(e.get("key_image"), f"{where}: key_image"))
            depth = read_pfm(self._path(e.get("key_depth"), f"{where}: key_depth"))
            key_k = _intrinsics_from_manifest(e.get("key_intrinsics"), f"{where}: key_intrinsics")
            views = []
            for j, ve in enumerate(e.get("views") or []):
                vw = f"{where}: view {j + 1}"
                img = read_ppm(self._path(ve.get("image"), f"{vw}: image"))
                if img.shape != key_img.shape:
                    raise SampleError(f"{vw}: image shape {img.shape} differs from keyview {key_img.shape}")
                views.append(
                    View(
                        img,
                        _pose_from_manifest(ve.get("pose_3x4_row_major", []), vw),
                        _intrinsics_from_manifest(ve.get("intrinsics"), vw),
                    )
                )
            rng = e.get("gt_range")
            gt_range = None if rng is None else (float(rng[0]), float(rng[1]))
        except (ValueError, TypeError, KeyError) as exc:
            if isinstance(exc, SampleError):
                raise
            raise SampleError(f"{where}: {exc}") from None
        sample = Sample(View(key_img, Pose.identity(), key_k), views, depth, gt_range, sid)
        return sample.validate()


def load_sample(manifest, index: int) -> Sample:
    """Load and validate sample ``index`` from a manifest path or :class:`Manifest`."""
    if not isinstance(manifest, Manifest):
        manifest = Manifest.load(manifest)
    return manifest.load_sample(index)


def manifest_entry(sample_id, key_image, key_depth, key_intrinsics, views, gt_range=None) -> dict:
    """Build one manifest entry; ``views`` holds ``(image_path, Pose, Intrinsics)`` triples."""
    entry = {
        "id": str(sample_id),
        "key_image": str(key_image),
        "key_depth": str(key_depth),
        "key_intrinsics": key_intrinsics.as_list(),
    }
    if gt_range is not None:
        entry["gt_range"] = [float(gt_range[0]), float(gt_range[1])]
    entry["views"] = [
        {
            "image": str(img),
            "pose_3x4_row_major": [float(x) for x in pose.matrix()[:3].ravel()],
            "intrinsics": k.as_list(),
        }
        for img, pose, k in views
    ]
    return entry
