"""Quasi-optimal source-view selection.

Every other view is first evaluated alone with the keyview. Views are then
added in order of those single-pair errors, and the prefix with the lowest
error wins.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .data import Sample
from .decoder import DepthEstimate
from .metrics import EvalSettings, evaluate_sample

Estimator = Callable[[Sample], DepthEstimate]


class ViewSelectionError(RuntimeError):
    def __init__(self, views, cause):
        super().__init__(f"estimation failed for view set {list(views)}: {cause}")
        self.views = tuple(views)


@dataclass
class SelectionResult:
    pairwise: list  # (view index, rel) in view-index order
    order: list  # 1-based view indices, ascending pairwise rel
    curve: list  # rel for prefix sizes 1..k
    best_size: int

    @property
    def best_views(self) -> list:
        return self.order[: self.best_size]

    @property
    def best_rel(self) -> float:
        return self.curve[self.best_size - 1]


def _rel_for(sample: Sample, views, estimator: Estimator, settings: EvalSettings) -> float:
    sub = sample.with_views(views)
    try:
        pred = estimator(sub)
        return evaluate_sample(pred, sub, settings).rel
    except Exception as exc:
        raise ViewSelectionError(views, exc) from exc


def pairwise_errors(sample: Sample, estimator: Estimator, settings: EvalSettings = EvalSettings()):
    return [(i, _rel_for(sample, [i], estimator, settings)) for i in range(1, len(sample.others) + 1)]


def grow_selection(sample: Sample, estimator: Estimator, settings: EvalSettings = EvalSettings()) -> SelectionResult:
    if not sample.others:
        raise ValueError("view selection needs at least one other view")
    pairwise = pairwise_errors(sample, estimator, settings)
    order = [i for i, _ in sorted(pairwise, key=lambda p: (p[1], p[0]))]
    curve = []
    for size in range(1, len(order) + 1):
        if size == 1:
            # the single-view prefix was already evaluated above
            curve.append(dict(pairwise)[order[0]])
        else:
            curve.append(_rel_for(sample, order[:size], estimator, settings))
    best = min(range(len(curve)), key=lambda j: (curve[j], j)) + 1
    return SelectionResult(pairwise, order, curve, best)
