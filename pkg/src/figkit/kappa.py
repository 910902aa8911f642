"""The multimodal convergence coefficient and its bootstrap estimator.

A feature's sample is histogrammed into 32 bins, smoothed, and split at
the local minima of the smoothed curve; kappa is the population-weighted
sum of the per-mode kurtoses computed on the raw values.  High kappa
means the values concentrate on a few acute modes (figurative
convergence), low kappa means they spread out.

Sets of different sizes are compared by repeatedly downsampling the
larger ones to the smallest size; the per-feature median over trials is
the retained estimator and the relative 95% interval half-width is the
reported bias bound.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateDataError, InputError

__all__ = [
    "SPIKE_CAP",
    "MIN_MODE_SIGMA",
    "MIN_MODE_POPULATION",
    "histogram32",
    "savgol_smooth",
    "split_modes",
    "ModeSplit",
    "mode_split",
    "kurtosis",
    "kappa",
    "kappa_per_feature",
    "FeatureSampleSet",
    "KappaReport",
    "bootstrap_kappa",
    "mean_median_kappa",
    "report_to_dict",
    "save_reports",
    "load_reports",
]

# A point-mass mode is maximally acute; the cap keeps it finite and
# log-plottable instead of inverting the metric by returning 0.
SPIKE_CAP = 1.0e4
MIN_MODE_SIGMA = 1.0e-12
MIN_MODE_POPULATION = 4

N_BINS = 32


def histogram32(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """32 equal-width bins over [min, max]; the max lands in the last bin.

    Returns (edges[33], counts[32]).  Needs at least 2 distinct values;
    the degenerate single-spike case is handled by kappa directly.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size < 2 or values.min() == values.max():
        raise DegenerateDataError("histogram needs at least 2 distinct values")
    edges = np.linspace(values.min(), values.max(), N_BINS + 1)
    idx = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, N_BINS - 1)
    counts = np.bincount(idx, minlength=N_BINS)
    return edges, counts


def savgol_smooth(counts: np.ndarray, window: int = 3, degree: int = 1) -> np.ndarray:
    """Width-3 degree-1 smoothing; equals a centered 3-point mean.

    Ends are mirror-padded (value at -1 is counts[1]).  Only the (3, 1)
    configuration is supported; it is the one the pipeline uses.
    """
    if window != 3 or degree != 1:
        raise ConfigError("only window=3, degree=1 smoothing is supported")
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size < window:
        raise ConfigError("smoothing window longer than the sequence")
    padded = np.pad(counts, 1, mode="reflect")
    return (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0


def split_modes(smoothed: np.ndarray) -> list[int]:
    """Bin indices of the interior local minima of the smoothed counts.

    A minimum needs a strictly larger left neighbor and, after skipping
    any flat run of equal values, a strictly larger right neighbor; the
    leftmost bin of a flat run carries the minimum.
    """
    s = np.asarray(smoothed, dtype=np.float64)
    minima: list[int] = []
    i = 1
    last = s.size - 1
    while i < last:
        if s[i] < s[i - 1]:
            j = i
            while j + 1 <= last and s[j + 1] == s[i]:
                j += 1
            if j + 1 <= last and s[j + 1] > s[i]:
                minima.append(i)
            i = j + 1
        else:
            i += 1
    return minima


@dataclass
class ModeSplit:
    """Everything the splitting stage derives from one sample."""

    bin_edges: np.ndarray       # 33 values
    counts: np.ndarray          # 32 raw occupancies
    smoothed_counts: np.ndarray
    minima_positions: list[int]
    cuts: list[float]           # right edge of each minimum bin
    mode_intervals: list[tuple[float, float]]  # (lo, hi], first includes lo


def mode_split(values: np.ndarray) -> ModeSplit:
    """Histogram, smooth, and locate the cut points for one sample."""
    edges, counts = histogram32(values)
    smoothed = savgol_smooth(counts)
    minima = split_modes(smoothed)
    cuts = [float(edges[i + 1]) for i in minima]
    bounds = [float(edges[0])] + cuts + [float(edges[-1])]
    intervals = list(zip(bounds[:-1], bounds[1:]))
    return ModeSplit(edges, counts, smoothed, minima, cuts, intervals)


def kurtosis(values: np.ndarray) -> float:
    """Population (non-excess) kurtosis E[((x - mu)/sigma)^4].

    Values are shifted by their minimum first; the moments are shift
    invariant and integer samples then stay bit-exact under integer
    translation.  Modes too small or too narrow for a fourth moment
    take the spike cap.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ConfigError("kurtosis of an empty sample")
    if x.size < MIN_MODE_POPULATION:
        return SPIKE_CAP
    d = x - x.min()
    mu = d.mean()
    sigma = math.sqrt(np.mean((d - mu) ** 2))
    if sigma < MIN_MODE_SIGMA:
        return SPIKE_CAP
    z = (d - mu) / sigma
    return float(np.mean(z**4))


def kappa(values: np.ndarray) -> float:
    """Population-weighted sum of per-mode kurtoses.

    Mode membership follows the cut points on the raw values with
    right-closed intervals: a value equal to a cut belongs to the mode
    on its left.  An all-equal sample is a single spike and returns the
    cap.  Weights are realized as exact integer counts over n.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 8:
        raise ConfigError("kappa needs at least 8 values")
    if not np.all(np.isfinite(x)):
        raise InputError("kappa input contains non-finite values")
    if x.min() == x.max():
        return SPIKE_CAP
    split = mode_split(x)
    if not split.cuts:
        return kurtosis(x)
    member = np.searchsorted(np.asarray(split.cuts), x, side="left")
    total = 0.0
    for mode in range(len(split.cuts) + 1):
        part = x[member == mode]
        if part.size:
            total += part.size * kurtosis(part)
    return total / x.size


def kappa_per_feature(samples: np.ndarray) -> np.ndarray:
    """kappa of every column of an N x F sample matrix."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ConfigError("expected an N x F matrix")
    return np.array([kappa(samples[:, j]) for j in range(samples.shape[1])])


@dataclass
class FeatureSampleSet:
    """A named N x F matrix of per-texel feature values."""

    name: str
    samples: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ConfigError(f"set {self.name!r}: samples must be N x F")
        if self.samples.shape[0] < 8:
            raise InputError(f"set {self.name!r}: needs at least 8 samples")
        if not np.all(np.isfinite(self.samples)):
            raise InputError(f"set {self.name!r}: non-finite feature values")
        if self.feature_names is None:
            self.feature_names = tuple(
                f"f{j:02d}" for j in range(self.samples.shape[1])
            )
        elif len(self.feature_names) != self.samples.shape[1]:
            raise ConfigError(f"set {self.name!r}: feature name count mismatch")


@dataclass
class KappaReport:
    """Per-set bootstrap summary."""

    set_name: str
    feature_names: tuple[str, ...]
    kappa: np.ndarray                 # direct, on the full set
    kappa_median: np.ndarray          # median over trials
    ci95_halfwidth_pct: np.ndarray    # relative 95% half-width, percent
    trials: int
    seed: int
    downsample_size: int
    extra: dict = field(default_factory=dict)


def _trial_kappas(
    sets: list[FeatureSampleSet], seed: int, trial: int, min_size: int
) -> list[np.ndarray]:
    out = []
    for si, s in enumerate(sets):
        n = s.samples.shape[0]
        if n == min_size:
            out.append(None)  # no resampling variability; filled later
            continue
        rng = np.random.default_rng([seed, trial, si])
        idx = rng.choice(n, size=min_size, replace=False)
        out.append(kappa_per_feature(s.samples[idx]))
    return out


def bootstrap_kappa(
    sets: list[FeatureSampleSet],
    trials: int = 5000,
    seed: int = 0,
    threads: int | None = None,
) -> list[KappaReport]:
    """Downsampling recalibration across sets of unequal size.

    Every set larger than the smallest is subsampled without
    replacement once per trial, with an RNG stream derived from
    (seed, trial, set index) so results do not depend on scheduling or
    thread count.  Per feature, the median kappa over trials is retained
    and the relative 95% half-width (q97.5 - q2.5) / (2 * median) is
    reported in percent.
    """
    if not sets:
        raise InputError("bootstrap_kappa needs at least one sample set")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    min_size = min(s.samples.shape[0] for s in sets)
    direct = [kappa_per_feature(s.samples) for s in sets]
    fixed = [
        kappa_per_feature(s.samples[:min_size]) if s.samples.shape[0] == min_size else None
        for s in sets
    ]

    if threads is None:
        threads = int(os.environ.get("FIGKIT_THREADS", "1") or "1")
    threads = max(1, threads)

    per_set = [np.empty((trials, s.samples.shape[1])) for s in sets]

    def run(trial: int) -> None:
        for si, vec in enumerate(_trial_kappas(sets, seed, trial, min_size)):
            per_set[si][trial] = fixed[si] if vec is None else vec

    if threads == 1:
        for t in range(trials):
            run(t)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(trials)))

    reports = []
    for si, s in enumerate(sets):
        arr = per_set[si]
        med = np.median(arr, axis=0)
        q_lo, q_hi = np.quantile(arr, [0.025, 0.975], axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            half = np.where(med != 0.0, 100.0 * (q_hi - q_lo) / (2.0 * med), 0.0)
        reports.append(
            KappaReport(
                set_name=s.name,
                feature_names=tuple(s.feature_names or ()),
                kappa=direct[si],
                kappa_median=med,
                ci95_halfwidth_pct=half,
                trials=trials,
                seed=seed,
                downsample_size=min_size,
            )
        )
    return reports


def mean_median_kappa(report: KappaReport) -> tuple[float, float]:
    """Arithmetic mean and median across the per-feature medians."""
    med = np.asarray(report.kappa_median, dtype=np.float64)
    if med.size == 0:
        raise InputError("report carries no features")
    return float(med.mean()), float(np.median(med))


def report_to_dict(report: KappaReport) -> dict:
    mean_k, median_k = mean_median_kappa(report)
    return {
        "set": report.set_name,
        "seed": report.seed,
        "trials": report.trials,
        "downsample_size": report.downsample_size,
        "features": [
            {
                "name": name,
                "kappa_median": float(report.kappa_median[j]),
                "ci95_halfwidth_pct": float(report.ci95_halfwidth_pct[j]),
            }
            for j, name in enumerate(report.feature_names)
        ],
        "mean_kappa": mean_k,
        "median_kappa": median_k,
    }


def save_reports(reports: list[KappaReport], path, meta: dict | None = None) -> None:
    doc: dict = {"reports": [report_to_dict(r) for r in reports]}
    if meta:
        doc["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_reports(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "reports" not in doc:
        raise InputError(f"{path}: not a kappa report file")
    return doc["reports"]
