"""Confusion tallies, derived scores, best-half selection, power law.

Counting paths are checked against per-pixel Python loops; the power
law is checked by exact round trips from noise-free curves and a
weighted-polyfit oracle over a fine local grid.
"""

from __future__ import annotations

import numpy as np
import pytest

from figkit.corpus import ONTOLOGY_3, ONTOLOGY_5, ClassMap
from figkit.errors import (
    ConfigError,
    InputError,
    InsufficientPointsError,
    ShapeMismatchError,
    UnreachableTargetError,
)
from figkit.segeval import (
    BestHalf,
    PowerLawFit,
    best_half,
    confusion,
    extrapolate,
    fit_power_law,
    metrics,
    metrics_to_dict,
    normalize_confusion,
    sum_confusions,
)
from oracles import oracle_confusion


def _maps(rng, shape=(64, 64), k=5):
    gt = ClassMap(rng.integers(0, k, size=shape).astype(np.int16), ONTOLOGY_5)
    pred = ClassMap(rng.integers(0, k, size=shape).astype(np.int16), ONTOLOGY_5)
    return pred, gt


# ---------------------------------------------------------------------------
# confusion counting


def test_confusion_matches_pixel_loop_oracle():
    rng = np.random.default_rng(101)
    for _ in range(10):
        pred, gt = _maps(rng)
        cm = confusion(pred, gt)
        np.testing.assert_array_equal(
            cm.counts, oracle_confusion(gt.indices, pred.indices, 5)
        )
        assert cm.total == 64 * 64


def test_confusion_orientation_is_gt_rows_pred_cols():
    gt = ClassMap(np.array([[0, 0]], dtype=np.int16), ONTOLOGY_5)
    pred = ClassMap(np.array([[1, 1]], dtype=np.int16), ONTOLOGY_5)
    cm = confusion(pred, gt)
    assert cm.counts[0, 1] == 2
    assert cm.counts[1, 0] == 0


def test_confusion_rejects_mismatches():
    rng = np.random.default_rng(102)
    pred, gt = _maps(rng)
    other = ClassMap(np.zeros((64, 64), dtype=np.int16), ONTOLOGY_3)
    with pytest.raises(ShapeMismatchError):
        confusion(other, gt)
    small = ClassMap(np.zeros((8, 8), dtype=np.int16), ONTOLOGY_5)
    with pytest.raises(ShapeMismatchError):
        confusion(small, gt)


def test_sum_confusions_pools_counts():
    rng = np.random.default_rng(103)
    cms = [confusion(*_maps(rng, shape=(16, 16))) for _ in range(3)]
    pooled = sum_confusions(cms)
    np.testing.assert_array_equal(
        pooled.counts, cms[0].counts + cms[1].counts + cms[2].counts
    )
    with pytest.raises(InputError):
        sum_confusions([])


# ---------------------------------------------------------------------------
# metrics


def test_metrics_four_pixel_toy_is_seven_twelfths():
    gt = ClassMap(np.array([[0, 0, 1, 1]], dtype=np.int16), ONTOLOGY_5)
    pred = ClassMap(np.array([[0, 1, 1, 1]], dtype=np.int16), ONTOLOGY_5)
    ms = metrics(confusion(pred, gt))
    assert ms.iou[0] == 0.5
    assert ms.iou[1] == 2.0 / 3.0
    assert np.isnan(ms.iou[2:]).all()  # absent classes are undefined
    np.testing.assert_allclose(ms.miou, 7.0 / 12.0, rtol=1e-15)


def test_metrics_match_per_class_counting():
    rng = np.random.default_rng(104)
    pred, gt = _maps(rng)
    ms = metrics(confusion(pred, gt))
    g = gt.indices.ravel()
    p = pred.indices.ravel()
    n = g.size
    for k in range(5):
        tp = int(np.sum((g == k) & (p == k)))
        fp = int(np.sum((g != k) & (p == k)))
        fn = int(np.sum((g == k) & (p != k)))
        tn = n - tp - fp - fn
        assert ms.iou[k] == tp / (tp + fp + fn)
        assert ms.accuracy[k] == (tp + tn) / n
        assert ms.precision[k] == tp / (tp + fp)
        assert ms.recall[k] == tp / (tp + fn)


def test_metrics_nan_semantics():
    # Class 3 never appears in gt or pred: iou/precision/recall undefined.
    counts = np.zeros((5, 5), dtype=np.int64)
    counts[0, 0] = 4
    counts[1, 2] = 2  # gt 1 predicted as 2: recall(1) = 0, precision(2) = 0
    from figkit.segeval import ConfusionMatrix

    ms = metrics(ConfusionMatrix(counts, ONTOLOGY_5))
    assert np.isnan(ms.iou[3]) and np.isnan(ms.iou[4])
    assert ms.recall[1] == 0.0
    assert np.isnan(ms.precision[1])  # nothing predicted as class 1
    assert ms.precision[2] == 0.0
    assert np.isnan(ms.recall[2])     # class 2 absent from gt
    assert ms.accuracy[3] == 1.0      # vacuous one-vs-rest accuracy
    # means skip the undefined entries
    np.testing.assert_allclose(ms.miou, np.nanmean(ms.iou))


def test_metrics_rejects_empty():
    from figkit.segeval import ConfusionMatrix

    with pytest.raises(InputError):
        metrics(ConfusionMatrix(np.zeros((5, 5), dtype=np.int64), ONTOLOGY_5))


def test_normalized_diagonal_is_recall_bitwise():
    rng = np.random.default_rng(105)
    pred, gt = _maps(rng)
    cm = confusion(pred, gt)
    norm, empty = normalize_confusion(cm)
    ms = metrics(cm)
    assert not empty.any()
    np.testing.assert_array_equal(np.diag(norm), ms.recall)
    np.testing.assert_allclose(norm.sum(axis=1), np.ones(5), rtol=1e-15)


def test_normalize_confusion_empty_rows():
    from figkit.segeval import ConfusionMatrix

    counts = np.zeros((5, 5), dtype=np.int64)
    counts[0, 0] = 3
    norm, empty = normalize_confusion(ConfusionMatrix(counts, ONTOLOGY_5))
    np.testing.assert_array_equal(empty, [False, True, True, True, True])
    np.testing.assert_array_equal(norm[1:], np.zeros((4, 5)))


# ---------------------------------------------------------------------------
# best half


def _diag_cm(correct: int, wrong: int):
    from figkit.segeval import ConfusionMatrix

    counts = np.zeros((5, 5), dtype=np.int64)
    counts[0, 0] = correct
    counts[0, 1] = wrong
    counts[1, 1] = 10
    return ConfusionMatrix(counts, ONTOLOGY_5)


def test_best_half_selects_strictly_above_median():
    patches = [
        ("p0", _diag_cm(10, 0)),   # best
        ("p1", _diag_cm(8, 2)),
        ("p2", _diag_cm(5, 5)),
        ("p3", _diag_cm(2, 8)),    # worst
    ]
    result = best_half(patches)
    assert result.selected_ids == ["p0", "p1"]
    assert not result.tie_fallback
    mious = [metrics(cm).miou for _, cm in patches]
    assert result.median_miou == float(np.median(mious))
    pooled = sum_confusions([patches[0][1], patches[1][1]])
    np.testing.assert_array_equal(result.pooled_cm.counts, pooled.counts)
    assert result.pooled.miou == metrics(pooled).miou


def test_best_half_all_tied_falls_back_to_everything():
    patches = [(f"p{i}", _diag_cm(5, 5)) for i in range(4)]
    result = best_half(patches)
    assert result.tie_fallback
    assert result.selected_ids == ["p0", "p1", "p2", "p3"]
    with pytest.raises(InputError):
        best_half(patches[:1])


# ---------------------------------------------------------------------------
# power law


def _curve(a, b, c, sizes):
    x = np.asarray(sizes, dtype=np.float64)
    return b + a * x ** (-c)


def test_power_law_recovers_noise_free_parameters():
    sizes = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0])
    fit = fit_power_law(sizes, _curve(2.0, 0.5, 1.0, sizes))
    np.testing.assert_allclose(fit.a, 2.0, rtol=1e-4)
    np.testing.assert_allclose(fit.b, 0.5, rtol=1e-4)
    np.testing.assert_allclose(fit.c, 1.0, rtol=1e-4)
    assert fit.residual < 1e-6
    assert fit.weighting == "linear"


def test_power_law_round_trip_and_target_inversion():
    sizes = np.array([1.0, 2.0, 5.0, 10.0, 20.0, 50.0])
    fit = fit_power_law(sizes, _curve(2.0, 0.5, 1.0, sizes))
    for x in (3.0, 10.0, 400.0):
        y = extrapolate(fit, target_size=x)
        back = extrapolate(fit, target_score=y)
        np.testing.assert_allclose(back, x, rtol=1e-9)
    # f(10) = 0.5 + 2/10 = 0.7, so a 0.7 target inverts to size 10
    np.testing.assert_allclose(extrapolate(fit, target_score=0.7), 10.0, rtol=1e-4)


def test_power_law_other_exponents():
    sizes = np.array([2.0, 3.0, 5.0, 9.0, 17.0, 33.0, 65.0])
    for c_true in (0.5, 2.5):
        fit = fit_power_law(sizes, _curve(-1.5, 0.9, c_true, sizes))
        np.testing.assert_allclose(fit.c, c_true, rtol=1e-4)
        np.testing.assert_allclose(fit.a, -1.5, rtol=1e-3)
        np.testing.assert_allclose(fit.b, 0.9, rtol=1e-3)


def test_power_law_is_locally_optimal_under_linear_weights():
    rng = np.random.default_rng(106)
    sizes = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    scores = _curve(1.2, 0.4, 0.8, sizes) + 0.01 * rng.normal(size=6)
    fit = fit_power_law(sizes, scores)
    w = sizes / sizes.sum()

    def oracle_sse(c):
        u = sizes ** (-c)
        coef = np.polyfit(u, scores, 1, w=np.sqrt(w))
        r = np.polyval(coef, u) - scores
        return float(w @ (r * r))

    got = oracle_sse(fit.c)
    fine = [oracle_sse(c) for c in np.linspace(fit.c - 0.01, fit.c + 0.01, 201) if c > 0]
    assert got <= min(fine) + 1e-12


def test_power_law_tie_prefers_smallest_exponent():
    sizes = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_power_law(sizes, np.full(4, 0.75))
    assert fit.c == 0.01  # every exponent fits a constant; smallest wins
    assert fit.a == pytest.approx(0.0, abs=1e-12)
    assert fit.b == pytest.approx(0.75, abs=1e-12)


def test_power_law_validation():
    with pytest.raises(InsufficientPointsError):
        fit_power_law([1.0, 1.0, 2.0], [0.1, 0.2, 0.3])
    with pytest.raises(ConfigError):
        fit_power_law([0.0, 1.0, 2.0], [0.1, 0.2, 0.3])
    with pytest.raises(InsufficientPointsError):
        fit_power_law([1.0, 2.0], [0.1, 0.2])
    with pytest.raises(InputError):
        fit_power_law([1.0, 2.0, 3.0], [0.1, np.nan, 0.3])


def test_extrapolate_unreachable_targets():
    fit = PowerLawFit(2.0, 0.5, 1.0, 0.0, (1.0, 2.0, 4.0), (2.5, 1.5, 1.0))
    with pytest.raises(UnreachableTargetError):
        extrapolate(fit, target_score=0.5)   # the asymptote itself
    with pytest.raises(UnreachableTargetError):
        extrapolate(fit, target_score=0.4)   # below it
    flat = PowerLawFit(0.0, 0.5, 1.0, 0.0, (1.0, 2.0, 4.0), (0.5, 0.5, 0.5))
    with pytest.raises(UnreachableTargetError):
        extrapolate(flat, target_score=0.9)
    with pytest.raises(ConfigError):
        extrapolate(fit)
    with pytest.raises(ConfigError):
        extrapolate(fit, target_score=0.7, target_size=4.0)
    with pytest.raises(ConfigError):
        extrapolate(fit, target_size=-1.0)


def test_metrics_to_dict_maps_nan_to_null():
    gt = ClassMap(np.array([[0, 0, 1, 1]], dtype=np.int16), ONTOLOGY_5)
    pred = ClassMap(np.array([[0, 1, 1, 1]], dtype=np.int16), ONTOLOGY_5)
    doc = metrics_to_dict(metrics(confusion(pred, gt)))
    assert doc["classes"]["frame"]["iou"] == 0.5
    assert doc["classes"]["water"]["iou"] is None
    assert doc["means"]["iou"] == pytest.approx(7.0 / 12.0)
