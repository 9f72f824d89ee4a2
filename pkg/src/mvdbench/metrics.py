"""Depth and uncertainty metrics of the evaluation protocol.

Per-sample pipeline (order matters): upsample -> align -> clip -> metrics.
Test-set numbers are unweighted means over samples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Sample, valid_depth_mask
from .decoder import DepthEstimate

CLIP_RANGE = (0.1, 100.0)
INLIER_THRESHOLD = 1.03
SPARSIFICATION_STEPS = 100  # removal fractions 0.00 .. 0.99


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EvalSettings:
    """``alignment`` is ``"none"``, ``"median"`` or ``"scalar"`` (with ``scale``)."""

    alignment: str = "none"
    scale: Optional[float] = None
    clip: tuple = CLIP_RANGE
    inlier_threshold: float = INLIER_THRESHOLD

    def __post_init__(self):
        if self.alignment not in ("none", "median", "scalar"):
            raise MetricError(f"unknown alignment {self.alignment!r}")
        if self.alignment == "scalar" and not (self.scale is not None and np.isfinite(self.scale) and self.scale > 0):
            raise MetricError("scalar alignment needs a positive finite scale")
        if not self.clip[0] < self.clip[1]:
            raise MetricError(f"clip bounds out of order: {self.clip}")
        if not self.inlier_threshold > 1:
            raise MetricError("inlier threshold must exceed 1")

    @classmethod
    def parse(cls, spec: str) -> "EvalSettings":
        """``none`` | ``median`` | ``scalar=S``."""
        if spec.startswith("scalar="):
            return cls("scalar", float(spec.split("=", 1)[1]))
        return cls(spec)

    def describe(self) -> str:
        return f"scalar={self.scale!r}" if self.alignment == "scalar" else self.alignment


@dataclass
class SampleMetrics:
    rel: float
    tau: float
    m: int
    ause: Optional[float] = None
    name: str = ""


@dataclass
class EvalResult:
    samples: list
    rel: float
    tau: float
    ause: Optional[float] = None


@dataclass
class SparsificationResult:
    fractions: np.ndarray
    oracle: np.ndarray
    uncertainty: np.ndarray
    error: np.ndarray
    ause: float
    extra: dict = field(default_factory=dict)


def _joint(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise MetricError(f"prediction shape {pred.shape} does not match ground truth {gt.shape}")
    ok = valid_depth_mask(pred) & valid_depth_mask(gt)
    if not ok.any():
        raise MetricError("no jointly valid pixels")
    return pred[ok], gt[ok]


def abs_rel(pred, gt) -> float:
    d, g = _joint(pred, gt)
    return 100.0 * float(np.mean(np.abs(d - g) / g))


def inlier_ratio(pred, gt, threshold: float = INLIER_THRESHOLD) -> float:
    d, g = _joint(pred, gt)
    return 100.0 * float(np.mean(np.maximum(d / g, g / d) < threshold))


def lower_median(x) -> float:
    x = np.sort(np.asarray(x, dtype=np.float64).ravel())
    if x.size == 0:
        raise MetricError("median of an empty set")
    return float(x[(x.size - 1) // 2])


def align_median(pred, gt):
    """Scale ``pred`` by ``median(gt) / median(pred)`` over jointly valid pixels."""
    d, g = _joint(pred, gt)
    md = lower_median(d)
    if not md > 0:
        raise MetricError(f"non-positive prediction median {md}")
    s = lower_median(g) / md
    pred = np.asarray(pred, dtype=np.float64)
    return np.where(valid_depth_mask(pred), pred * s, pred), s


def clip_depth(depth, settings: EvalSettings = EvalSettings()):
    """Clamp valid depths into the clip range; invalid entries pass through."""
    depth = np.asarray(depth, dtype=np.float64)
    lo, hi = settings.clip
    return np.where(valid_depth_mask(depth), np.clip(depth, lo, hi), depth)


def _resize_coords(n_out: int, n_in: int):
    # pixel-centre aligned mapping, clamped at the borders
    x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    return np.clip(x, 0.0, n_in - 1.0)


def _bilinear_resize(img, valid, out_h, out_w):
    in_h, in_w = img.shape
    ys = _resize_coords(out_h, in_h)
    xs = _resize_coords(out_w, in_w)
    y0 = np.minimum(np.floor(ys).astype(int), max(in_h - 2, 0))
    x0 = np.minimum(np.floor(xs).astype(int), max(in_w - 2, 0))
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    w = np.asarray(valid, dtype=np.float64)
    v = np.where(valid, img, 0.0)
    num = (
        (1 - fy) * (1 - fx) * v[np.ix_(y0, x0)]
        + (1 - fy) * fx * v[np.ix_(y0, x1)]
        + fy * (1 - fx) * v[np.ix_(y1, x0)]
        + fy * fx * v[np.ix_(y1, x1)]
    )
    den = (
        (1 - fy) * (1 - fx) * w[np.ix_(y0, x0)]
        + (1 - fy) * fx * w[np.ix_(y0, x1)]
        + fy * (1 - fx) * w[np.ix_(y1, x0)]
        + fy * fx * w[np.ix_(y1, x1)]
    )
    out = np.zeros((out_h, out_w))
    np.divide(num, den, out=out, where=den > 0)
    return out, den > 0


def upsample_prediction(pred: DepthEstimate, full_w: int, full_h: int) -> DepthEstimate:
    """Bilinear resize in the inverse-depth domain; validity by nearest neighbour.

    Invalid source pixels do not contribute to the interpolated values.
    """
    in_h, in_w = pred.inv_depth.shape
    if (in_h, in_w) == (full_h, full_w):
        return pred
    rows = np.minimum(((np.arange(full_h) + 0.5) * in_h / full_h).astype(int), in_h - 1)
    cols = np.minimum(((np.arange(full_w) + 0.5) * in_w / full_w).astype(int), in_w - 1)
    valid = pred.valid[np.ix_(rows, cols)]
    inv, has = _bilinear_resize(pred.inv_depth, pred.valid, full_h, full_w)
    unc, _ = _bilinear_resize(pred.uncertainty, pred.valid, full_h, full_w)
    valid = valid & has & (inv > 0)
    return DepthEstimate(np.where(valid, inv, 0.0), np.where(valid, unc, 0.0), valid)


def prepare_prediction(pred: DepthEstimate, gt, settings: EvalSettings):
    """Run upsample -> align -> clip. Returns ``(depth, uncertainty, scale)``."""
    gt = np.asarray(gt, dtype=np.float64)
    full_h, full_w = gt.shape
    in_h, in_w = pred.inv_depth.shape
    if in_h > full_h or in_w > full_w:
        raise MetricError(f"prediction {in_h}x{in_w} is larger than ground truth {full_h}x{full_w}")
    pred = upsample_prediction(pred, full_w, full_h)
    depth = pred.depth()
    scale = 1.0
    if settings.alignment == "median":
        depth, scale = align_median(depth, gt)
    elif settings.alignment == "scalar":
        scale = float(settings.scale)
        depth = depth * scale
    return clip_depth(depth, settings), pred.uncertainty, scale


def evaluate_sample(pred: DepthEstimate, sample, settings: EvalSettings = EvalSettings(), with_ause: bool = False):
    """Per-sample rel and tau (percent), optionally AUSE of the prediction's uncertainty.

    ``sample`` may be a :class:`Sample` or a bare ground-truth depth map.
    """
    gt = sample.gt_depth if isinstance(sample, Sample) else sample
    name = sample.name if isinstance(sample, Sample) else ""
    gt = np.asarray(gt, dtype=np.float64)
    depth, unc, _ = prepare_prediction(pred, gt, settings)
    ok = valid_depth_mask(depth) & valid_depth_mask(gt)
    res = SampleMetrics(
        rel=abs_rel(depth, gt),
        tau=inlier_ratio(depth, gt, settings.inlier_threshold),
        m=int(ok.sum()),
        name=name,
    )
    if with_ause and res.m >= SPARSIFICATION_STEPS:
        err = np.abs(depth[ok] - gt[ok]) / gt[ok]
        res.ause = sparsification(err, unc[ok]).ause
    return res


def aggregate_testset(results: Sequence[SampleMetrics]) -> EvalResult:
    """Unweighted mean over samples, regardless of their pixel counts."""
    results = list(results)
    if not results:
        raise MetricError("no samples to aggregate")
    rel = float(np.mean([r.rel for r in results]))
    tau = float(np.mean([r.tau for r in results]))
    auses = [r.ause for r in results if r.ause is not None]
    return EvalResult(results, rel, tau, float(np.mean(auses)) if auses else None)


def _remaining_means(errors, order):
    # mean of errors left after removing the first k entries of `order`
    m = errors.size
    tail = np.cumsum(errors[order][::-1])[::-1]  # tail[k] = sum of order[k:]
    ks = np.arange(SPARSIFICATION_STEPS) * m // SPARSIFICATION_STEPS
    return tail[ks] / (m - ks)


def sparsification(errors, uncertainties) -> SparsificationResult:
    """Sparsification curves and AUSE.

    For removal fractions ``f = 0.00 .. 0.99`` the ``floor(f * m)`` pixels
    with the largest uncertainty (oracle: largest error) are dropped, ties
    going to the lower pixel index first. Both curves are normalised by the
    mean error at ``f = 0``; AUSE is the trapezoidal area of their difference.
    """
    e = np.asarray(errors, dtype=np.float64).ravel()
    u = np.asarray(uncertainties, dtype=np.float64).ravel()
    if e.shape != u.shape:
        raise MetricError(f"errors and uncertainties differ in length: {e.size} vs {u.size}")
    if e.size < SPARSIFICATION_STEPS:
        raise MetricError(f"need at least {SPARSIFICATION_STEPS} pixels, got {e.size}")
    if np.any(e < 0) or not np.all(np.isfinite(e)) or not np.all(np.isfinite(u)):
        raise MetricError("errors must be finite and non-negative; uncertainties finite")
    fractions = np.arange(SPARSIFICATION_STEPS) / SPARSIFICATION_STEPS
    idx = np.arange(e.size)
    oracle = _remaining_means(e, np.lexsort((idx, -e)))
    by_unc = _remaining_means(e, np.lexsort((idx, -u)))
    base = oracle[0]
    if base <= 0:
        zeros = np.zeros(SPARSIFICATION_STEPS)
        return SparsificationResult(fractions, zeros, zeros.copy(), zeros.copy(), 0.0)
    oracle = oracle / base
    by_unc = by_unc / base
    err = by_unc - oracle
    ause = float(np.sum((err[1:] + err[:-1]) * 0.5 * np.diff(fractions)))
    return SparsificationResult(fractions, oracle, by_unc, err, ause)
