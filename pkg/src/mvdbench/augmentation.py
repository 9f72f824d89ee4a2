"""Scale augmentation, eraser augmentation and shared photometric jitter.

Scale augmentation keeps a log-binned histogram of the depths seen so far.
Each new sample is rescaled so that its median depth lands on the label of
the least-populated bin: translations are multiplied by the factor, ground
truth depths likewise, and depths whose inverse leaves the supervised band
are masked.
"""
from __future__ import annotations

import csv
import math
from dataclasses import replace

import numpy as np

from .data import Sample, View, valid_depth_mask
from .metrics import lower_median
from .rng import PCG32

# supervised inverse-depth band, 1/m
INV_DEPTH_BAND = (0.009, 2.75)
DEFAULT_BINS = 100


class DepthHistogram:
    """Counts of depths in log-uniform bins spanning ``1/2.75 .. 1/0.009`` m.

    Not thread safe: callers serialise updates.
    """

    def __init__(self, n_bins: int = DEFAULT_BINS, d_lo: float = 1.0 / INV_DEPTH_BAND[1], d_hi: float = 1.0 / INV_DEPTH_BAND[0]):
        if n_bins < 1 or not 0 < d_lo < d_hi:
            raise ValueError("need n_bins >= 1 and 0 < d_lo < d_hi")
        self.edges = np.exp(np.linspace(np.log(d_lo), np.log(d_hi), n_bins + 1))
        self.counts = np.zeros(n_bins, dtype=np.int64)

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def labels(self) -> np.ndarray:
        return np.sqrt(self.edges[:-1] * self.edges[1:])

    def bin_index(self, depths) -> np.ndarray:
        """Bin of each depth, -1 when outside ``[edges[0], edges[-1])``."""
        d = np.asarray(depths, dtype=np.float64)
        idx = np.searchsorted(self.edges, d, side="right") - 1
        inside = valid_depth_mask(d) & (idx >= 0) & (idx < self.n_bins)
        return np.where(inside, idx, -1)

    def update(self, depths) -> None:
        idx = self.bin_index(np.asarray(depths).ravel())
        idx = idx[idx >= 0]
        self.counts += np.bincount(idx, minlength=self.n_bins)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["label", "count"])
            for lab, c in zip(self.labels, self.counts):
                w.writerow([repr(float(lab)), int(c)])


def histogram_update(h: DepthHistogram, depths) -> None:
    h.update(depths)


def choose_scale(h: DepthHistogram, sample_median_depth: float) -> float:
    """``label(least populated bin) / median``; ties pick the lowest bin."""
    if not sample_median_depth > 0:
        raise ValueError(f"median depth must be positive, got {sample_median_depth}")
    b = int(np.argmin(h.counts))
    return float(h.labels[b] / sample_median_depth)


def mask_inverse_band(depth, band=INV_DEPTH_BAND) -> np.ndarray:
    """Invalidate (set to 0) depths whose inverse lies outside ``band``."""
    depth = np.asarray(depth)
    ok = valid_depth_mask(depth)
    inv = np.zeros(depth.shape)
    inv[ok] = 1.0 / depth[ok].astype(np.float64)
    keep = ok & (inv >= band[0]) & (inv <= band[1])
    return np.where(keep, depth, np.zeros((), dtype=depth.dtype))


def apply_scale(sample: Sample, s: float) -> Sample:
    """Multiply translations and ground-truth depth by ``s``; mask the inverse-depth band."""
    if not (np.isfinite(s) and s > 0):
        raise ValueError(f"scale factor must be positive and finite, got {s}")
    others = [replace(v, pose=v.pose.scaled(s)) for v in sample.others]
    gt = np.asarray(sample.gt_depth)
    ok = valid_depth_mask(gt)
    scaled = np.where(ok, gt * s, gt).astype(gt.dtype, copy=False)
    rng = None if sample.gt_range is None else (sample.gt_range[0] * s, sample.gt_range[1] * s)
    return replace(sample, others=others, gt_depth=mask_inverse_band(scaled), gt_range=rng)


def sample_median_depth(sample: Sample) -> float:
    gt = np.asarray(sample.gt_depth, dtype=np.float64)
    return lower_median(gt[valid_depth_mask(gt)])


class ScaleAugmenter:
    """Stateful scale augmentation loop.

    ``medians`` tracks where each augmented sample's median landed, which
    is the histogram the greedy choice flattens exactly.
    """

    def __init__(self, n_bins: int = DEFAULT_BINS):
        self.depths = DepthHistogram(n_bins)
        self.medians = DepthHistogram(n_bins)

    def __call__(self, sample: Sample) -> tuple[Sample, float]:
        s = choose_scale(self.medians, sample_median_depth(sample))
        out = apply_scale(sample, s)
        self.depths.update(out.gt_depth)
        self.medians.update([sample_median_depth(sample) * s])
        return out, s


def _rect_side(n: int, rng: PCG32) -> int:
    lo = max(1, -(-n // 10))
    hi = max(lo, (2 * n) // 5)
    return rng.randint(lo, hi)


def erase_regions(views, rng_seed: int) -> list:
    """Fill 1-3 random rectangles per view with that view's mean colour.

    Only pass other views; the keyview is never erased. Each side spans 10-40%
    of the image dimension.
    """
    rng = PCG32(rng_seed)
    out = []
    for v in views:
        img = np.array(v.image, dtype=np.float64)
        h, w = img.shape[:2]
        mean = img.reshape(h * w, -1).mean(axis=0)
        fill = mean if img.ndim == 3 else mean[0]
        for _ in range(rng.randint(1, 3)):
            rw = _rect_side(w, rng)
            rh = _rect_side(h, rng)
            x0 = rng.randint(0, w - rw)
            y0 = rng.randint(0, h - rh)
            img[y0 : y0 + rh, x0 : x0 + rw] = fill
        out.append(replace(v, image=img))
    return out


def photometric_params(rng_seed: int) -> tuple[float, float, float]:
    """One ``(brightness, contrast, gamma)`` draw; gain and gamma are log-uniform."""
    rng = PCG32(rng_seed)
    brightness = rng.uniform(-0.1, 0.1)
    contrast = math.exp(rng.uniform(math.log(0.8), math.log(1.25)))
    gamma = math.exp(rng.uniform(math.log(0.8), math.log(1.25)))
    return brightness, contrast, gamma


def photometric_transform(views, brightness: float, contrast: float, gamma: float) -> list:
    out = []
    for v in views:
        img = np.clip(np.asarray(v.image, dtype=np.float64), 0.0, 1.0)
        out.append(replace(v, image=np.clip(contrast * img**gamma + brightness, 0.0, 1.0)))
    return out


def photometric_augment(views, rng_seed: int) -> list:
    """Apply the same photometric draw to every view."""
    return photometric_transform(views, *photometric_params(rng_seed))
