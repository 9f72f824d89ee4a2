"""Per-view plane-sweep cost volumes over inverse-depth hypotheses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import View
from .geometry import invert_pose, plane_sweep_homography

# absolute-scale default when no depth range is known, meters
DEFAULT_RANGE = (0.2, 100.0)


class SweepError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    d_min: float = DEFAULT_RANGE[0]
    d_max: float = DEFAULT_RANGE[1]
    n_hyp: int = 64
    patch_radius: int = 2
    softmin_temp: float = 0.05
    weight_temp: float = 0.25

    def __post_init__(self):
        if not (np.isfinite(self.d_min) and np.isfinite(self.d_max) and 0 < self.d_min < self.d_max):
            raise SweepError(f"need 0 < d_min < d_max, got ({self.d_min}, {self.d_max})")
        if self.n_hyp < 2:
            raise SweepError(f"n_hyp must be >= 2, got {self.n_hyp}")
        if self.patch_radius < 1:
            raise SweepError(f"patch_radius must be >= 1, got {self.patch_radius}")
        if not (self.softmin_temp > 0 and self.weight_temp > 0):
            raise SweepError("temperatures must be positive")

    def with_range(self, d_min: float, d_max: float) -> "SweepConfig":
        return SweepConfig(d_min, d_max, self.n_hyp, self.patch_radius, self.softmin_temp, self.weight_temp)


@dataclass(frozen=True, eq=False)
class CostVolume:
    costs: np.ndarray  # (N, H, W), 0 = perfect match, invalid cells hold 1.0
    valid: np.ndarray  # (N, H, W) bool
    hypotheses: np.ndarray  # (N,) inverse depths, strictly increasing

    @property
    def shape(self):
        return self.costs.shape


def build_hypotheses(cfg: SweepConfig) -> np.ndarray:
    """Inverse depths spaced uniformly between ``1/d_max`` and ``1/d_min``."""
    lo = 1.0 / cfg.d_max
    hi = 1.0 / cfg.d_min
    k = np.arange(cfg.n_hyp, dtype=np.float64)
    return lo + k * (hi - lo) / (cfg.n_hyp - 1)


def zncc_cost(patch_a, patch_b) -> tuple[float, bool]:
    """Matching cost ``(1 - ZNCC) / 2`` of two equal patches and its validity.

    Flat patches (variance below 1e-12) have no defined correlation; they get
    cost 1.0 and are reported invalid.
    """
    a = np.asarray(patch_a, dtype=np.float64).ravel()
    b = np.asarray(patch_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise SweepError(f"patch shapes differ: {np.shape(patch_a)} vs {np.shape(patch_b)}")
    ac = a - a.mean()
    bc = b - b.mean()
    saa = float(ac @ ac)
    sbb = float(bc @ bc)
    if saa / a.size < kernels.MIN_VARIANCE or sbb / b.size < kernels.MIN_VARIANCE:
        return 1.0, False
    z = min(1.0, max(-1.0, float(ac @ bc) / np.sqrt(saa * sbb)))
    return (1.0 - z) * 0.5, True


def sweep_homographies(key: View, other: View, hypotheses: np.ndarray) -> np.ndarray:
    """Keyview-to-other homographies for each hypothesis, shape (N, 3, 3)."""
    key_to_other = invert_pose(other.pose)
    return np.stack(
        [plane_sweep_homography(key.intrinsics, other.intrinsics, key_to_other, float(rho)) for rho in hypotheses]
    )


def sweep_view(key: View, other: View, cfg: SweepConfig) -> CostVolume:
    """Cost volume of ``other`` warped onto the keyview at every hypothesis plane."""
    if key.image.shape[:2] != other.image.shape[:2]:
        raise SweepError(f"resolution mismatch: key {key.image.shape[:2]} vs other {other.image.shape[:2]}")
    hyps = build_hypotheses(cfg)
    hs = sweep_homographies(key, other, hyps)
    h, w = key.image.shape[:2]
    warped, wvalid = kernels.warp_stack(other.gray(), hs, h, w)
    costs, valid = kernels.zncc_volume(key.gray(), warped, wvalid, cfg.patch_radius)
    return CostVolume(costs, valid, hyps)
