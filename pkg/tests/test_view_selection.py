from dataclasses import replace

import numpy as np
import pytest

from mvdbench import synth
from mvdbench.data import Sample, View
from mvdbench.decoder import DepthEstimate, estimate_depth
from mvdbench.fusion import FusionMode
from mvdbench.geometry import Pose
from mvdbench.metrics import evaluate_sample
from mvdbench.plane_sweep import SweepConfig
from mvdbench.view_selection import ViewSelectionError, grow_selection, pairwise_errors


def tagged_sample(tags, size=8):
    """Sample whose other views carry a tag in pixel (0, 0) for stub estimators."""
    k = synth.default_intrinsics(size)
    key = View(np.zeros((size, size, 3)), Pose.identity(), k)
    others = []
    for t in tags:
        img = np.zeros((size, size, 3))
        img[0, 0, 0] = t
        others.append(View(img, Pose(np.eye(3), [0.1, 0, 0]), k))
    gt = np.linspace(1.0, 3.0, size * size).reshape(size, size)
    return Sample(key, others, gt)


def stub_estimator(err_of_set):
    """Prediction = gt * (1 + err) with ``err`` a function of the view tags."""

    def est(sample):
        tags = tuple(float(v.image[0, 0, 0]) for v in sample.others)
        d = sample.gt_depth * (1 + err_of_set(tags))
        return DepthEstimate(1.0 / d, np.zeros_like(d), np.ones(d.shape, bool))

    return est


def test_single_view():
    s = tagged_sample([0.3])
    r = grow_selection(s, stub_estimator(lambda t: 0.1))
    assert len(r.pairwise) == 1 and r.order == [1] and len(r.curve) == 1
    assert r.best_views == [1] and r.best_rel == pytest.approx(10.0)


def test_order_follows_pairwise_rel():
    s = tagged_sample([0.09, 0.05])
    # each view alone has error = its tag; together 0.07
    r = grow_selection(s, stub_estimator(lambda t: t[0] if len(t) == 1 else 0.07))
    assert [i for i, _ in r.pairwise] == [1, 2]
    assert r.order == [2, 1]
    np.testing.assert_allclose(r.curve, [5.0, 7.0])
    assert r.best_views == [2]


def test_ties_broken_by_index_and_smallest_best_size():
    s = tagged_sample([0.05, 0.02, 0.05, 0.02])
    r = grow_selection(s, stub_estimator(lambda t: t[0] if len(t) == 1 else (0.02 if len(t) == 2 else 0.01)))
    assert r.order == [2, 4, 1, 3]
    assert r.best_size == 3
    flat = grow_selection(s, stub_estimator(lambda t: 0.03))
    assert flat.best_size == 1
    assert max(flat.curve) - min(flat.curve) <= 1e-9


def test_identical_views_equal_pairwise():
    spec = synth.plane_scene(size=48, n_other=1, focal=40.0)
    base = synth.render(spec)
    s = replace(base, others=[base.others[0], base.others[0]])
    cfg = SweepConfig(1.0, 4.0, 32, 2)
    pw = pairwise_errors(s, lambda x: estimate_depth(x, cfg))
    assert abs(pw[0][1] - pw[1][1]) <= 1e-9


def test_estimator_failure_names_subset():
    s = tagged_sample([0.01, 0.02])

    def bad(sample):
        if len(sample.others) == 2:
            raise RuntimeError("boom")
        return stub_estimator(lambda t: 0.01)(sample)

    with pytest.raises(ViewSelectionError) as exc:
        grow_selection(s, bad)
    assert set(exc.value.views) == {1, 2}


def corrupt(spec, sample, i):
    wrong = synth.render(replace(spec, texture=synth.Texture(seed=99)))
    others = list(sample.others)
    others[i - 1] = replace(others[i - 1], image=wrong.others[i - 1].image)
    return replace(sample, others=others)


def test_pairwise_matches_standalone_runs():
    spec = synth.random_scene(3, size=48, n_other=2)
    s = synth.render(spec)
    lo, hi = s.depth_range()
    cfg = SweepConfig(lo, hi, 32, 2)
    pw = pairwise_errors(s, lambda x: estimate_depth(x, cfg))
    for i, rel in pw:
        alone = replace(s, others=[s.others[i - 1]])
        assert rel == evaluate_sample(estimate_depth(alone, cfg), alone).rel


def test_corrupted_view_is_excluded():
    spec = synth.plane_scene(size=64, n_other=2, focal=60.0)
    s = corrupt(spec, synth.render(spec), 2)
    cfg = SweepConfig(1.0, 4.0, 48, 2)
    r = grow_selection(s, lambda x: estimate_depth(x, cfg, FusionMode.WEIGHTED))
    assert r.order[-1] == 2
    assert 2 not in r.best_views
