"""Segmentation scoring and training-size extrapolation.

Pixel-level confusion matrices feed per-class IoU, one-vs-rest
accuracy, precision, and recall; corpus scores pool counts across
patches (micro-averaging) while per-patch mean IoU supports the
best-half selection.  Score-versus-training-size curves are fitted
with an extended power law f(x) = b + a * x^(-c) under linear item
weighting, then inverted to estimate the annotation budget a target
score requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import ClassMap, Ontology
from .errors import (
    ConfigError,
    InputError,
    InsufficientPointsError,
    ShapeMismatchError,
    UnreachableTargetError,
)

__all__ = [
    "ConfusionMatrix",
    "confusion",
    "sum_confusions",
    "ClassMetrics",
    "metrics",
    "normalize_confusion",
    "BestHalf",
    "best_half",
    "PowerLawFit",
    "fit_power_law",
    "extrapolate",
    "metrics_to_dict",
]


@dataclass
class ConfusionMatrix:
    """counts[gt][pred] pixel tallies for one ontology."""

    counts: np.ndarray  # K x K int64
    ontology: Ontology

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(pred: ClassMap, gt: ClassMap) -> ConfusionMatrix:
    """Tally counts[g][p] over aligned prediction/ground-truth maps."""
    if pred.ontology != gt.ontology:
        raise ShapeMismatchError("prediction and ground truth use different ontologies")
    if pred.indices.shape != gt.indices.shape:
        raise ShapeMismatchError(
            f"shape mismatch: pred {pred.indices.shape} vs gt {gt.indices.shape}"
        )
    k = gt.ontology.arity
    joint = gt.indices.astype(np.int64).ravel() * k + pred.indices.astype(np.int64).ravel()
    counts = np.bincount(joint, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts, gt.ontology)


def sum_confusions(cms: list[ConfusionMatrix]) -> ConfusionMatrix:
    if not cms:
        raise InputError("no confusion matrices to pool")
    ontology = cms[0].ontology
    for cm in cms[1:]:
        if cm.ontology != ontology:
            raise ShapeMismatchError("cannot pool matrices across ontologies")
    total = np.sum([cm.counts for cm in cms], axis=0)
    return ConfusionMatrix(total.astype(np.int64), ontology)


@dataclass
class ClassMetrics:
    """Per-class scores; nan marks a metric undefined for that class."""

    class_names: tuple[str, ...]
    iou: np.ndarray
    accuracy: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def _mean(self, arr: np.ndarray) -> float:
        defined = arr[~np.isnan(arr)]
        return float(defined.mean()) if defined.size else float("nan")

    @property
    def miou(self) -> float:
        return self._mean(self.iou)

    @property
    def mean_accuracy(self) -> float:
        return self._mean(self.accuracy)

    @property
    def mean_precision(self) -> float:
        return self._mean(self.precision)

    @property
    def mean_recall(self) -> float:
        return self._mean(self.recall)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.full(num.shape, np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """IoU, one-vs-rest accuracy, precision, recall per class.

    A class with no ground-truth and no predicted pixels is undefined
    (nan) and excluded from the means; precision and recall are also
    undefined individually when their denominators vanish.
    """
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise InputError("empty confusion matrix")
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    tn = total - tp - fp - fn
    return ClassMetrics(
        class_names=cm.ontology.classes,
        iou=_ratio(tp, tp + fp + fn),
        accuracy=(tp + tn) / total,
        precision=_ratio(tp, tp + fp),
        recall=_ratio(tp, tp + fn),
    )


def normalize_confusion(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Rows divided by their ground-truth pixel count.

    The diagonal of the result is exactly the recall vector.  Empty
    rows come back as zeros with their flag set.
    """
    counts = cm.counts.astype(np.float64)
    row_sums = counts.sum(axis=1)
    empty = row_sums == 0
    norm = np.zeros_like(counts)
    norm[~empty] = counts[~empty] / row_sums[~empty, None]
    return norm, empty


@dataclass
class BestHalf:
    """Pooled scores over the patches beating the median mean-IoU."""

    selected_ids: list[str]
    pooled: ClassMetrics
    pooled_cm: ConfusionMatrix
    median_miou: float
    tie_fallback: bool


def best_half(patches: list[tuple[str, ConfusionMatrix]]) -> BestHalf:
    """Select patches with mean IoU strictly above the median.

    When every patch ties the median (so the strict subset is empty),
    fall back to >= and flag it.
    """
    if len(patches) < 2:
        raise InputError("best_half needs at least 2 patches")
    mious = np.array([metrics(cm).miou for _, cm in patches])
    median = float(np.median(mious))
    keep = mious > median
    tie = not bool(keep.any())
    if tie:
        keep = mious >= median
    chosen = [patches[i] for i in np.flatnonzero(keep)]
    pooled_cm = sum_confusions([cm for _, cm in chosen])
    return BestHalf(
        selected_ids=[pid for pid, _ in chosen],
        pooled=metrics(pooled_cm),
        pooled_cm=pooled_cm,
        median_miou=median,
        tie_fallback=tie,
    )


@dataclass
class PowerLawFit:
    """f(x) = b + a * x^(-c), fitted under weights w ~ x."""

    a: float
    b: float
    c: float
    residual: float  # unweighted RMS over the support points
    sizes: tuple[float, ...]
    scores: tuple[float, ...]
    weighting: str = "linear"


def _solve_ab(u: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """Weighted least squares for y ~ a*u + b; returns (a, b, sse)."""
    sw = w.sum()
    swu = float(w @ u)
    swuu = float(w @ (u * u))
    swy = float(w @ y)
    swuy = float(w @ (u * y))
    det = swuu * sw - swu * swu
    if det <= 1e-300 * max(swuu * sw, 1.0):
        a, b = 0.0, swy / sw
    else:
        a = (swuy * sw - swu * swy) / det
        b = (swuu * swy - swu * swuy) / det
    r = a * u + b - y
    return a, b, float(w @ (r * r))


def fit_power_law(
    sizes, scores, c_max: float = 20.0, grid_step: float = 0.01
) -> PowerLawFit:
    """Grid search over c with closed-form (a, b) at each candidate.

    The grid covers (0, c_max] in grid_step increments; ties resolve
    toward the smallest c, and a golden-section pass refines the winner
    only when it genuinely improves the weighted error.
    """
    x = np.asarray(sizes, dtype=np.float64)
    y = np.asarray(scores, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError("sizes and scores must be equal-length vectors")
    if np.unique(x).size < 3:
        raise InsufficientPointsError("need at least 3 distinct sizes")
    if np.any(x <= 0):
        raise ConfigError("sizes must be positive")
    if not np.all(np.isfinite(y)):
        raise InputError("scores contain non-finite values")
    w = x / x.sum()

    def sse_at(c: float) -> tuple[float, float, float]:
        return _solve_ab(x ** (-c), y, w)

    n_grid = int(round(c_max / grid_step))
    cs = (np.arange(n_grid) + 1) * grid_step
    sses = np.empty(n_grid)
    for i, c in enumerate(cs):
        sses[i] = sse_at(float(c))[2]
    best_sse = float(sses.min())
    # Keep the smallest c among near-exact ties.  The absolute term absorbs
    # rounding noise when the curve fits exactly (best_sse ~ 0): near c = 0
    # the design matrix is almost singular and cancellation noise in the sse
    # reaches ~1e-25, while genuinely distinct grid neighbours differ by
    # many orders of magnitude more.
    tol = best_sse * 1e-12 + 1e-22 * (float(w @ (y * y)) + 1.0)
    pick = int(np.flatnonzero(sses <= best_sse + tol)[0])
    c_best = float(cs[pick])
    sse_best = float(sses[pick])

    lo = cs[pick - 1] if pick > 0 else grid_step / 2.0
    hi = cs[pick + 1] if pick + 1 < n_grid else c_max
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    c1 = hi - phi * (hi - lo)
    c2 = lo + phi * (hi - lo)
    f1 = sse_at(c1)[2]
    f2 = sse_at(c2)[2]
    for _ in range(80):
        if f1 <= f2:
            hi, c2, f2 = c2, c1, f1
            c1 = hi - phi * (hi - lo)
            f1 = sse_at(c1)[2]
        else:
            lo, c1, f1 = c1, c2, f2
            c2 = lo + phi * (hi - lo)
            f2 = sse_at(c2)[2]
    c_ref = c1 if f1 <= f2 else c2
    sse_ref = min(f1, f2)
    if sse_ref < sse_best - tol:
        c_best, sse_best = float(c_ref), float(sse_ref)

    a, b, _ = sse_at(c_best)
    fitted = b + a * x ** (-c_best)
    residual = float(np.sqrt(np.mean((fitted - y) ** 2)))
    return PowerLawFit(a, b, c_best, residual, tuple(x), tuple(y))


def extrapolate(
    fit: PowerLawFit,
    target_score: float | None = None,
    target_size: float | None = None,
) -> float:
    """Forward-evaluate the curve at a size, or invert it for a score.

    Inversion requires the target to lie on the monotone branch: with
    a > 0 the curve decreases toward the asymptote b, so only targets
    strictly above b are reachable (symmetrically below b for a < 0).
    """
    if (target_score is None) == (target_size is None):
        raise ConfigError("give exactly one of target_score or target_size")
    if target_size is not None:
        if target_size <= 0:
            raise ConfigError("size must be positive")
        return float(fit.b + fit.a * target_size ** (-fit.c))
    if fit.a == 0.0:
        raise UnreachableTargetError("flat fit: every size scores b")
    if target_score == fit.b:
        raise UnreachableTargetError(
            f"target {target_score:g} sits on the asymptote b = {fit.b:g}"
        )
    ratio = fit.a / (target_score - fit.b)
    if not math.isfinite(ratio) or ratio <= 0:
        raise UnreachableTargetError(
            f"target {target_score:g} is beyond the asymptote b = {fit.b:g}"
        )
    return float(ratio ** (1.0 / fit.c))


def _json_safe(value: float) -> float | None:
    return None if math.isnan(value) else float(value)


def metrics_to_dict(ms: ClassMetrics) -> dict:
    return {
        "classes": {
            name: {
                "iou": _json_safe(ms.iou[i]),
                "accuracy": _json_safe(ms.accuracy[i]),
                "precision": _json_safe(ms.precision[i]),
                "recall": _json_safe(ms.recall[i]),
            }
            for i, name in enumerate(ms.class_names)
        },
        "means": {
            "iou": _json_safe(ms.miou),
            "accuracy": _json_safe(ms.mean_accuracy),
            "precision": _json_safe(ms.mean_precision),
            "recall": _json_safe(ms.mean_recall),
        },
    }
