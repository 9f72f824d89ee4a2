"""Cost volume decoding: winner-take-all, parabolic refinement, Laplace-scale uncertainty."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Sample
from .fusion import FusionMode, fuse
from .plane_sweep import CostVolume, SweepConfig, sweep_view


@dataclass(frozen=True, eq=False)
class DepthEstimate:
    inv_depth: np.ndarray  # 1/m, 0 where invalid
    uncertainty: np.ndarray  # Laplace scale b in 1/m
    valid: np.ndarray
    # minimum sat on the hypothesis range edge or next to an invalid hypothesis
    boundary: Optional[np.ndarray] = None

    def depth(self) -> np.ndarray:
        out = np.zeros_like(self.inv_depth)
        ok = self.valid & (self.inv_depth > 0)
        out[ok] = 1.0 / self.inv_depth[ok]
        return out


def wta_decode(vol: CostVolume):
    """Index of the cheapest valid hypothesis per pixel and its cost.

    ``argmin`` returns the first minimum, so ties go to the smaller index.
    Returns ``(index, min_cost, valid)``; invalid pixels get index 0, cost 1.
    """
    masked = np.where(vol.valid, vol.costs, np.inf)
    idx = np.argmin(masked, axis=0)
    valid = vol.valid.any(axis=0)
    cmin = np.take_along_axis(masked, idx[None], axis=0)[0]
    return np.where(valid, idx, 0), np.where(valid, cmin, 1.0), valid


def subpixel_offset(c_prev, c_mid, c_next):
    """Vertex offset of the parabola through three equally spaced costs, clamped to [-0.5, 0.5]."""
    c_prev, c_mid, c_next = np.broadcast_arrays(
        np.asarray(c_prev, dtype=np.float64), np.asarray(c_mid, dtype=np.float64), np.asarray(c_next, dtype=np.float64)
    )
    curv = c_prev - 2.0 * c_mid + c_next
    ok = curv > 0
    delta = np.zeros(curv.shape)
    np.divide(c_prev - c_next, 2.0 * curv, out=delta, where=ok)
    return np.clip(delta, -0.5, 0.5)


def subpixel_refine(vol: CostVolume, k_star: np.ndarray) -> np.ndarray:
    """Refined inverse depth ``rho[k*] + delta * step``.

    ``delta`` is zero at the first and last hypothesis and wherever a
    neighbouring cell is invalid.
    """
    n = vol.costs.shape[0]
    hyps = vol.hypotheses
    step = (hyps[-1] - hyps[0]) / (n - 1)
    k = np.asarray(k_star)
    inner = (k > 0) & (k < n - 1)
    kp = np.clip(k - 1, 0, n - 1)[None]
    kn = np.clip(k + 1, 0, n - 1)[None]
    c_prev = np.take_along_axis(vol.costs, kp, axis=0)[0]
    c_mid = np.take_along_axis(vol.costs, k[None], axis=0)[0]
    c_next = np.take_along_axis(vol.costs, kn, axis=0)[0]
    nb_ok = np.take_along_axis(vol.valid, kp, axis=0)[0] & np.take_along_axis(vol.valid, kn, axis=0)[0]
    delta = np.where(inner & nb_ok, subpixel_offset(c_prev, c_mid, c_next), 0.0)
    return hyps[k] + delta * step


def uncertainty_map(vol: CostVolume, inv_depth: np.ndarray, softmin_temp: float) -> np.ndarray:
    """Laplace scale ``b = sum_k p_k |rho_k - rho_hat|`` with ``p`` the softmin of valid costs."""
    logits = np.where(vol.valid, -vol.costs / softmin_temp, -np.inf)
    peak = logits.max(axis=0)
    any_valid = np.isfinite(peak)
    with np.errstate(invalid="ignore"):
        e = np.where(vol.valid, np.exp(logits - np.where(any_valid, peak, 0.0)[None]), 0.0)
    z = e.sum(axis=0)
    dev = np.abs(vol.hypotheses[:, None, None] - inv_depth[None])
    b = np.zeros(inv_depth.shape)
    np.divide((e * dev).sum(axis=0), z, out=b, where=z > 0)
    return b


def boundary_minima(vol: CostVolume, k_star: np.ndarray) -> np.ndarray:
    """Pixels whose winning hypothesis is not bracketed by two valid neighbours."""
    n = vol.costs.shape[0]
    k = np.asarray(k_star)
    kp = np.clip(k - 1, 0, n - 1)[None]
    kn = np.clip(k + 1, 0, n - 1)[None]
    bracketed = (
        (k > 0)
        & (k < n - 1)
        & np.take_along_axis(vol.valid, kp, axis=0)[0]
        & np.take_along_axis(vol.valid, kn, axis=0)[0]
    )
    return ~bracketed


def decode(vol: CostVolume, softmin_temp: float = 0.05, reject_boundary: bool = True) -> DepthEstimate:
    """WTA + parabolic refinement + softmin Laplace scale.

    With ``reject_boundary`` the pixels flagged by :func:`boundary_minima`
    are marked invalid: their minimum is cut off by the sweep range or by
    the other view's field of view, so the depth is not trustworthy.
    """
    k_star, _, decoded = wta_decode(vol)
    boundary = boundary_minima(vol, k_star) & decoded
    valid = decoded & ~boundary if reject_boundary else decoded
    rho = subpixel_refine(vol, k_star)
    # rejected pixels keep their (large) uncertainty so callers can inspect it
    b = uncertainty_map(vol, rho, softmin_temp)
    return DepthEstimate(np.where(valid, rho, 0.0), np.where(decoded, b, 0.0), valid, boundary)


def estimate_depth(sample: Sample, cfg: SweepConfig, mode=FusionMode.AVERAGE) -> DepthEstimate:
    """Sweep every other view, fuse, decode and attach uncertainty."""
    vols = [sweep_view(sample.keyview, other, cfg) for other in sample.others]
    return decode(fuse(vols, mode, cfg.weight_temp), cfg.softmin_temp)
