"""Inter-class proximity and the embedding layout.

Class signatures are per-feature histograms over a class's texels,
binned on ranges pooled across every signature under comparison so the
same value always falls in the same bin.  Signatures are compared with
Pearson correlation; texel descriptors are laid out with an exact t-SNE
followed by an optimal assignment onto a near-square grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import pearsonr
from sklearn.manifold import TSNE

from .errors import ConfigError, InputError, ZeroVarianceError

__all__ = [
    "ClassSignature",
    "pooled_ranges",
    "class_signature",
    "build_signatures",
    "CorrelationMatrix",
    "correlate",
    "mean_interclass",
    "correlation_to_dict",
    "correlation_to_json",
    "write_correlation_csv",
    "Embedding2D",
    "tsne_project",
    "GridLayout",
    "grid_assign",
    "write_layout_csv",
]

SIGNATURE_BINS = 32


@dataclass
class ClassSignature:
    """Per-feature histograms over one class's texels."""

    corpus: str
    class_name: str
    histograms: np.ndarray  # F x bins, integer counts
    sample_count: int
    ranges: np.ndarray      # F x 2 pooled (lo, hi)

    @property
    def label(self) -> tuple[str, str]:
        return (self.corpus, self.class_name)

    def flatten(self) -> np.ndarray:
        return self.histograms.astype(np.float64).ravel()


def pooled_ranges(matrices: list[np.ndarray]) -> np.ndarray:
    """Per-feature (min, max) across every matrix under comparison."""
    if not matrices:
        raise InputError("no feature matrices to pool")
    lo = np.min([np.asarray(m).min(axis=0) for m in matrices], axis=0)
    hi = np.max([np.asarray(m).max(axis=0) for m in matrices], axis=0)
    return np.stack([lo, hi], axis=1)


def class_signature(
    corpus: str,
    class_name: str,
    samples: np.ndarray,
    ranges: np.ndarray,
    bins: int = SIGNATURE_BINS,
) -> ClassSignature:
    """Histogram each feature of a class sample over shared ranges.

    A feature whose pooled range collapses to a point puts all its mass
    in bin 0.  Values at interior edges go right, the range max goes in
    the last bin, matching the convergence statistic's binning.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 8:
        raise InputError(f"class {corpus}/{class_name}: needs at least 8 texels")
    ranges = np.asarray(ranges, dtype=np.float64)
    if ranges.shape != (samples.shape[1], 2):
        raise ConfigError("ranges must be F x 2")
    hist = np.zeros((samples.shape[1], bins), dtype=np.int64)
    for j in range(samples.shape[1]):
        lo, hi = ranges[j]
        v = samples[:, j]
        if v.min() < lo or v.max() > hi:
            raise ConfigError(f"feature {j}: values outside the pooled range")
        if lo == hi:
            hist[j, 0] = v.size
            continue
        edges = np.linspace(lo, hi, bins + 1)
        idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, bins - 1)
        hist[j] = np.bincount(idx, minlength=bins)
    return ClassSignature(corpus, class_name, hist, samples.shape[0], ranges)


def build_signatures(
    named_sets: list[tuple[str, str, np.ndarray]], bins: int = SIGNATURE_BINS
) -> list[ClassSignature]:
    """Signatures for (corpus, class, samples) triples with pooled ranges."""
    ranges = pooled_ranges([m for _, _, m in named_sets])
    return [
        class_signature(corpus, cls, m, ranges, bins) for corpus, cls, m in named_sets
    ]


@dataclass
class CorrelationMatrix:
    labels: list[tuple[str, str]]
    r: np.ndarray
    p: np.ndarray


def _pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson r via a single square root of the variance product.

    sqrt(fl(s*s)) == s in IEEE arithmetic, so identical vectors and
    power-of-two rescalings come out at exactly +-1 instead of one ulp
    short, which the library promises for degenerate comparisons.
    """
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(dx @ dy) / math.sqrt(float(dx @ dx) * float(dy @ dy))
    return min(1.0, max(-1.0, r))


def correlate(signatures: list[ClassSignature]) -> CorrelationMatrix:
    """Pairwise Pearson r (plus two-sided p) on flattened histograms."""
    if len(signatures) < 2:
        raise InputError("correlate needs at least 2 signatures")
    shape = signatures[0].histograms.shape
    ranges = signatures[0].ranges
    for sig in signatures[1:]:
        if sig.histograms.shape != shape or not np.array_equal(sig.ranges, ranges):
            raise ConfigError("signatures were not built on shared bin ranges")
    vectors = [sig.flatten() for sig in signatures]
    for sig, vec in zip(signatures, vectors):
        if vec.min() == vec.max():
            raise ZeroVarianceError(
                f"signature {sig.corpus}/{sig.class_name} has zero variance"
            )
    k = len(vectors)
    r = np.eye(k)
    p = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            r[i, j] = r[j, i] = _pearson_r(vectors[i], vectors[j])
            p[i, j] = p[j, i] = float(pearsonr(vectors[i], vectors[j]).pvalue)
    return CorrelationMatrix([sig.label for sig in signatures], r, p)


def mean_interclass(
    m: CorrelationMatrix, corpus: str
) -> tuple[dict[str, float], float]:
    """Mean off-diagonal r per class within one corpus, plus the overall
    mean over its unordered class pairs."""
    idx = [i for i, (c, _) in enumerate(m.labels) if c == corpus]
    if len(idx) < 2:
        raise InputError(f"corpus {corpus!r} has fewer than 2 classes")
    per_class: dict[str, float] = {}
    for i in idx:
        others = [m.r[i, j] for j in idx if j != i]
        per_class[m.labels[i][1]] = float(np.mean(others))
    pairs = [m.r[i, j] for a, i in enumerate(idx) for j in idx[a + 1 :]]
    return per_class, float(np.mean(pairs))


def correlation_to_dict(m: CorrelationMatrix) -> dict:
    return {
        "labels": [[c, k] for c, k in m.labels],
        "r": [[float(v) for v in row] for row in m.r],
        "p": [[float(v) for v in row] for row in m.p],
    }


def write_correlation_csv(m: CorrelationMatrix, path) -> None:
    names = [f"{c}/{k}" for c, k in m.labels]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["corpus", "class"] + names)
        for (c, k), row in zip(m.labels, m.r):
            writer.writerow([c, k] + [repr(float(v)) for v in row])


@dataclass
class Embedding2D:
    coords: np.ndarray  # N x 2
    perplexity: float
    seed: int
    iterations: int


def tsne_project(
    features: np.ndarray,
    perplexity: float = 30.0,
    seed: int = 0,
    iterations: int = 1000,
) -> Embedding2D:
    """Exact-gradient t-SNE with seeded random initialization.

    Exact duplicate rows are collapsed before the projection and share
    one embedding point afterwards: identical inputs are
    indistinguishable, so splitting them apart would be an artifact of
    symmetry breaking.  The output is re-centered on its mean.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ConfigError("expected an N x F matrix")
    n = features.shape[0]
    if perplexity <= 0:
        raise ConfigError("perplexity must be positive")
    if n <= 3 * perplexity:
        raise InputError(
            f"too few samples ({n}) for perplexity {perplexity:g}; need N > 3*perplexity"
        )
    if iterations < 250:
        raise ConfigError("iterations must be >= 250")
    uniq, inverse = np.unique(features, axis=0, return_inverse=True)
    if uniq.shape[0] == 1:
        coords = np.zeros((n, 2))
    else:
        # duplicates may leave fewer distinct rows than the perplexity allows
        perp = min(float(perplexity), max(1.0, (uniq.shape[0] - 1) / 3.0))
        model = TSNE(
            n_components=2,
            perplexity=perp,
            init="random",
            random_state=seed,
            method="exact",
            max_iter=iterations,
            learning_rate=200.0,
            early_exaggeration=12.0,
        )
        coords = model.fit_transform(uniq)[inverse].astype(np.float64)
    coords = coords - coords.mean(axis=0)
    return Embedding2D(coords, float(perplexity), int(seed), int(iterations))


@dataclass
class GridLayout:
    rows: int
    cols: int
    cells: np.ndarray  # N x 2 of (row, col)


def grid_assign(emb: Embedding2D) -> GridLayout:
    """Place every point on a near-square grid, minimizing total squared
    distance between min-max-normalized coords and cell centers."""
    coords = np.asarray(emb.coords, dtype=np.float64)
    n = coords.shape[0]
    if n < 1:
        raise InputError("nothing to place on a grid")
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    mins = coords.min(axis=0)
    span = coords.max(axis=0) - mins
    unit = (coords - mins) / np.where(span > 0, span, 1.0)
    unit[:, span == 0] = 0.5
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    centers = np.stack(
        [(cc.ravel() + 0.5) / cols, (rr.ravel() + 0.5) / rows], axis=1
    )
    cost = ((unit[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    _, cell_idx = linear_sum_assignment(cost)
    cells = np.stack([cell_idx // cols, cell_idx % cols], axis=1)
    return GridLayout(rows, cols, cells.astype(np.int64))


def write_layout_csv(
    path, texel_keys: list[tuple[str, int, int]], layout: GridLayout
) -> None:
    """Grid placement per texel: map_id,x,y,row,col."""
    if len(texel_keys) != layout.cells.shape[0]:
        raise ConfigError("layout does not cover the texel list")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["map_id", "x", "y", "row", "col"])
        for (map_id, x, y), (row, col) in zip(texel_keys, layout.cells):
            writer.writerow([map_id, x, y, int(row), int(col)])


def correlation_to_json(m: CorrelationMatrix, path, meta: dict | None = None) -> None:
    doc = correlation_to_dict(m)
    if meta:
        doc["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
