"""Fusion of view-wise cost volumes by plain or confidence-weighted averaging."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .plane_sweep import CostVolume


class FusionMode(str, Enum):
    AVERAGE = "average"
    WEIGHTED = "weighted"


class FusionError(ValueError):
    pass


def _check(vols) -> None:
    if not vols:
        raise FusionError("need at least one cost volume")
    ref = vols[0]
    for i, v in enumerate(vols[1:], start=1):
        if v.costs.shape != ref.costs.shape:
            raise FusionError(f"volume {i} has shape {v.costs.shape}, expected {ref.costs.shape}")
        if not np.array_equal(v.hypotheses, ref.hypotheses):
            raise FusionError(f"volume {i} uses different hypotheses")


def _accumulate(vols, weights) -> CostVolume:
    # weights: (V, H, W); accumulation runs over views in index order
    num = np.zeros(vols[0].costs.shape)
    den = np.zeros(vols[0].costs.shape)
    for vol, w in zip(vols, weights):
        wv = np.where(vol.valid, w[None], 0.0)
        num += wv * vol.costs
        den += wv
    ok = den > 0
    costs = np.ones_like(num)
    np.divide(num, den, out=costs, where=ok)
    return CostVolume(costs, ok, vols[0].hypotheses)


def fuse_average(vols) -> CostVolume:
    """Mean over the valid entries of each cell; cells valid nowhere stay invalid at 1.0."""
    _check(vols)
    ones = np.ones((len(vols),) + vols[0].costs.shape[1:])
    return _accumulate(vols, ones)


def confidence_weights(vols, weight_temp: float = 0.25) -> np.ndarray:
    """Per-view, per-pixel weights ``valid_fraction * exp(-min_cost / weight_temp)``.

    Normalised to sum to one over views; pixels where no view has any valid
    hypothesis get uniform weights. Returns shape (V, H, W).
    """
    _check(vols)
    raw = []
    for vol in vols:
        frac = vol.valid.mean(axis=0)
        cmin = np.where(vol.valid, vol.costs, np.inf).min(axis=0)
        raw.append(np.where(frac > 0, frac * np.exp(-np.where(frac > 0, cmin, 0.0) / weight_temp), 0.0))
    raw = np.stack(raw)
    total = raw.sum(axis=0)
    n = len(vols)
    return np.where(total > 0, raw / np.where(total > 0, total, 1.0), 1.0 / n)


def fuse_weighted(vols, weights) -> CostVolume:
    """Weighted mean over the valid entries of each cell.

    Weights are renormalised over the valid subset. They are first divided by
    their per-pixel maximum; this leaves the result unchanged mathematically
    and makes uniform weights reproduce :func:`fuse_average` bit for bit.
    """
    _check(vols)
    w = np.asarray(weights, dtype=np.float64)
    expected = (len(vols),) + vols[0].costs.shape[1:]
    if w.shape != expected:
        raise FusionError(f"weights have shape {w.shape}, expected {expected}")
    peak = w.max(axis=0)
    w = np.where(peak > 0, w / np.where(peak > 0, peak, 1.0), 0.0)
    return _accumulate(vols, w)


def fuse(vols, mode=FusionMode.AVERAGE, weight_temp: float = 0.25) -> CostVolume:
    mode = FusionMode(mode)
    if mode is FusionMode.AVERAGE:
        return fuse_average(vols)
    return fuse_weighted(vols, confidence_weights(vols, weight_temp))
