import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from mvdbench.decoder import DepthEstimate
from mvdbench.metrics import (
    EvalSettings,
    MetricError,
    SampleMetrics,
    abs_rel,
    aggregate_testset,
    align_median,
    clip_depth,
    evaluate_sample,
    inlier_ratio,
    lower_median,
    sparsification,
    upsample_prediction,
)


def estimate_from_depth(d, unc=None):
    d = np.asarray(d, dtype=float)
    ok = d > 0
    inv = np.where(ok, 1.0 / np.where(ok, d, 1.0), 0.0)
    return DepthEstimate(inv, np.zeros_like(d) if unc is None else unc, ok)


def flat_rel_tau(pred, gt, thr=1.03):
    rel, inl, m = 0.0, 0, 0
    for d, g in zip(np.ravel(pred), np.ravel(gt)):
        if d > 0 and g > 0 and np.isfinite(d) and np.isfinite(g):
            m += 1
            rel += abs(d - g) / g
            inl += max(d / g, g / d) < thr
    return 100 * rel / m, 100 * inl / m, m


HAND_GT = np.array([1.0, 2.0, 4.0, 5.0])
HAND_PRED = np.array([1.1, 2.0, 3.0, 5.0])


def test_hand_case():
    assert abs_rel(HAND_PRED, HAND_GT) == pytest.approx(8.75, abs=1e-12)
    assert inlier_ratio(HAND_PRED, HAND_GT) == 50.0


def test_identity_and_constant_ratio():
    g = np.random.default_rng(0).uniform(1, 10, 50)
    assert abs_rel(g, g) == 0.0 and inlier_ratio(g, g) == 100.0
    assert abs_rel(1.02 * g, g) == pytest.approx(2.0, abs=1e-12)


def test_inlier_threshold_is_strict():
    g = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    assert inlier_ratio(1.03 * g, g) == 0.0


def test_no_joint_pixels_rejected():
    with pytest.raises(MetricError):
        abs_rel(np.zeros(4), np.ones(4))
    with pytest.raises(MetricError):
        inlier_ratio(np.ones(3), np.ones(4))


def test_clip_bounds():
    np.testing.assert_array_equal(clip_depth(np.array([0.05, 150.0, 5.0, 0.0])), [0.1, 100.0, 5.0, 0.0])


def test_lower_median():
    assert lower_median([4, 1, 3, 2]) == 2
    assert lower_median([3, 1, 2]) == 2


def test_align_median_cases():
    g = np.random.default_rng(1).uniform(1, 10, 31)
    assert align_median(g / 2, g)[1] == pytest.approx(2.0, rel=1e-15)
    assert align_median(g, g)[1] == 1.0
    with pytest.raises(MetricError):
        align_median(np.zeros(3), g[:3])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 60))
def test_align_median_postcondition(seed, n):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.5, 50, n)
    p = rng.uniform(0.5, 50, n)
    a, _ = align_median(p, g)
    assert lower_median(a) == pytest.approx(lower_median(g), rel=1e-9)


def test_evaluate_sample_settings():
    rng = np.random.default_rng(2)
    gt = rng.uniform(1, 20, (10, 12))
    gt[0, 0] = 0  # invalid GT pixel
    m = evaluate_sample(estimate_from_depth(gt), gt)
    assert m.rel == pytest.approx(0.0, abs=1e-12) and (m.tau, m.m) == (100.0, 119)
    third = estimate_from_depth(gt / 3)
    m = evaluate_sample(third, gt, EvalSettings("median"))
    assert m.rel == pytest.approx(0.0, abs=1e-12) and m.tau == 100.0
    m = evaluate_sample(third, gt)
    assert m.rel == pytest.approx(200 / 3, rel=1e-9) and m.tau == 0.0
    m = evaluate_sample(third, gt, EvalSettings("scalar", 3.0))
    assert m.rel == pytest.approx(0.0, abs=1e-12)


def test_evaluate_sample_aligns_before_clipping():
    # predictions 1000x too far; clipping first would flatten them to 100 m
    gt = np.linspace(1.0, 5.0, 40).reshape(5, 8)
    m = evaluate_sample(estimate_from_depth(gt * 1000), gt, EvalSettings("median"))
    assert m.rel == pytest.approx(0.0, abs=1e-10)
    clipped_first = np.clip(gt * 1000, 0.1, 100)
    assert abs_rel(align_median(clipped_first, gt)[0], gt) > 10


def test_evaluate_sample_shape_mismatch():
    with pytest.raises(MetricError):
        evaluate_sample(estimate_from_depth(np.ones((6, 4))), np.ones((5, 4)))
    # smaller predictions are upsampled, not rejected
    assert evaluate_sample(estimate_from_depth(np.ones((4, 4))), np.ones((5, 4))).rel == pytest.approx(0.0, abs=1e-12)


def test_aggregation_unweighted():
    r = aggregate_testset([SampleMetrics(2.0, 90.0, 10), SampleMetrics(4.0, 80.0, 100)])
    assert (r.rel, r.tau) == (3.0, 85.0)
    one = aggregate_testset([SampleMetrics(1.5, 70.0, 7)])
    assert (one.rel, one.tau) == (1.5, 70.0)
    with pytest.raises(MetricError):
        aggregate_testset([])


def test_random_samples_match_flat_loop():
    rng = np.random.default_rng(3)
    per, exp = [], []
    for _ in range(5):
        gt = rng.uniform(0.5, 80, (8, 8))
        gt[rng.random(gt.shape) < 0.2] = 0
        pred = gt * rng.uniform(0.9, 1.1, gt.shape)
        per.append(evaluate_sample(estimate_from_depth(pred), gt))
        exp.append(flat_rel_tau(np.clip(pred, 0.1, 100), gt))
    for m, (rel, tau, n) in zip(per, exp):
        assert m.rel == pytest.approx(rel, rel=1e-12) and m.tau == pytest.approx(tau, rel=1e-12) and m.m == n
    agg = aggregate_testset(per)
    assert agg.rel == pytest.approx(sum(e[0] for e in exp) / 5, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.5, 2.0))
def test_joint_scaling_invariance(seed, s):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(1, 40, 30)
    pred = gt * rng.uniform(0.8, 1.2, 30)
    assert abs_rel(pred * s, gt * s) == pytest.approx(abs_rel(pred, gt), rel=1e-9)
    assert inlier_ratio(pred * s, gt * s) == inlier_ratio(pred, gt) or np.any(
        np.isclose(np.maximum(pred / gt, gt / pred), 1.03, rtol=1e-12)
    )


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_tau_monotone_and_rel_permutation(seed):
    rng = np.random.default_rng(seed)
    gt = rng.uniform(1, 40, 50)
    pred = gt * rng.uniform(0.9, 1.1, 50)
    taus = [inlier_ratio(pred, gt, t) for t in (1.01, 1.03, 1.05, 1.25)]
    assert taus == sorted(taus)
    perm = rng.permutation(50)
    assert abs_rel(pred[perm], gt[perm]) == pytest.approx(abs_rel(pred, gt), rel=1e-12)


def test_upsample_same_size_and_constant():
    est = estimate_from_depth(np.full((4, 5), 2.0))
    assert upsample_prediction(est, 5, 4) is est
    up = upsample_prediction(est, 10, 8)
    assert up.inv_depth.shape == (8, 10)
    np.testing.assert_allclose(up.inv_depth, 0.5, rtol=0, atol=1e-15)
    assert up.valid.all()


def test_upsample_ramp_midpoints():
    # half-pixel-centre 2x bilinear: interior outputs sit 1/4 and 3/4 between inputs
    inv = np.tile(np.arange(1.0, 5.0), (3, 1))
    est = DepthEstimate(inv, np.zeros_like(inv), np.ones(inv.shape, bool))
    up = upsample_prediction(est, 8, 6)
    x = np.clip((np.arange(8) + 0.5) / 2 - 0.5, 0, 3)
    np.testing.assert_allclose(up.inv_depth, np.tile(1.0 + x, (6, 1)), atol=1e-15)
    np.testing.assert_allclose(up.inv_depth[0, 1:7], [1.25, 1.75, 2.25, 2.75, 3.25, 3.75], atol=1e-15)


def test_upsample_validity_nearest():
    inv = np.ones((2, 2))
    valid = np.array([[True, False], [True, True]])
    up = upsample_prediction(DepthEstimate(inv, inv, valid), 4, 4)
    np.testing.assert_array_equal(up.valid, np.kron(valid, np.ones((2, 2), bool)))
    # invalid neighbours do not drag values toward zero
    np.testing.assert_allclose(up.inv_depth[up.valid], 1.0)


def sparsification_oracle(e, u):
    # direct summation with Python sorting, ties by index
    m = len(e)
    order_u = sorted(range(m), key=lambda j: (-u[j], j))
    order_e = sorted(range(m), key=lambda j: (-e[j], j))
    base = sum(e) / m
    curve = []
    for i in range(100):
        k = i * m // 100
        ru = [e[j] for j in order_u[k:]]
        ro = [e[j] for j in order_e[k:]]
        curve.append((sum(ru) / len(ru) - sum(ro) / len(ro)) / base)
    return sum((curve[i] + curve[i + 1]) / 2 * 0.01 for i in range(99)), curve


def test_ause_oracle_uncertainty_is_zero():
    e = np.random.default_rng(4).random(500)
    r = sparsification(e, e)
    assert r.ause == 0.0
    assert r.fractions.size == 100 and r.fractions[-1] == 0.99


def test_ause_reversed_ranking_matches_direct_sum():
    e = np.arange(1.0, 101.0)
    r = sparsification(e, -e)
    exp, curve = sparsification_oracle(list(e), list(-e))
    assert r.ause == pytest.approx(exp, abs=1e-9)
    np.testing.assert_allclose(r.error, curve, atol=1e-12)
    assert r.ause > 0


def test_constant_uncertainty_nonnegative_error():
    e = np.random.default_rng(5).random(300)
    r = sparsification(e, np.ones_like(e))
    assert np.all(r.error >= -1e-12)


def test_all_zero_error_defined_as_zero():
    r = sparsification(np.zeros(200), np.random.default_rng(6).random(200))
    assert r.ause == 0.0


def test_sparsification_input_checks():
    with pytest.raises(MetricError):
        sparsification(np.ones(50), np.ones(50))
    with pytest.raises(MetricError):
        sparsification(np.ones(100), np.ones(101))
    with pytest.raises(MetricError):
        sparsification(-np.ones(100), np.ones(100))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(100, 400))
def test_sparsification_matches_oracle_and_is_nonnegative(seed, m):
    rng = np.random.default_rng(seed)
    e = np.round(rng.random(m), 2)  # forces ties
    u = np.round(e + rng.normal(scale=0.2, size=m), 1)
    r = sparsification(e, u)
    assume(e.sum() > 0)
    exp, curve = sparsification_oracle(list(e), list(u))
    np.testing.assert_allclose(r.error, curve, atol=1e-9)
    assert r.ause == pytest.approx(exp, abs=1e-9)
    assert np.all(r.error >= -1e-12) and r.ause >= 0
    assert r.oracle[0] == pytest.approx(1.0) and r.uncertainty[0] == pytest.approx(1.0)
