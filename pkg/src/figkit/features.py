"""Visual descriptors for map texels.

A texel yields a 29-entry vector: 12 color moments (mean, std, skew,
kurtosis over R, G, B of the per-map z-scored channels), a 12-bin
rotation-invariant local-binary-pattern histogram (16 samples at radius
2 over the Otsu-binarized plane), and 5 oriented-gradient superbins
(24 unsigned orientation bins folded into vertical, horizontal,
diagonal, regular-oblique, irregular-oblique).  The full vector is
L1-normalized.  A 14-entry simplified variant keeps channel means,
moments of the value plane, a semantic LBP triple, and the 5 gradient
superbins.

LBP binning: the 17 possible ones-counts of a 16-bit pattern fold by
k <-> 16-k into 9 keys; keys 0, 4 and 8 each split once more (key 0
into plateau vs strict extremum, keys 4 and 8 into uniform vs
non-uniform), giving bins 0..8 for the folded keys and 9..11 for the
split-off residues.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError, TexelTooSmallError, ZeroVarianceError
from .raster import binarize, sampling_supports, to_grayscale, zscore_channel

__all__ = [
    "LBP_POINTS",
    "LBP_RADIUS",
    "HOG_BINS",
    "FEATURE_LABELS",
    "SIMPLIFIED_LABELS",
    "color_moments",
    "lbp_histogram",
    "lbp_semantic",
    "hog_superbins",
    "FeatureVector",
    "feature_vector",
    "simplified_vector",
    "MapPlanes",
    "prepare_map",
    "extract_map_features",
    "write_features_csv",
    "read_features_csv",
]

LBP_POINTS = 16
LBP_RADIUS = 2
HOG_BINS = 24

_HOG_LABELS = ("hog_vertical", "hog_horizontal", "hog_diagonal",
               "hog_reg_oblique", "hog_irr_oblique")

FEATURE_LABELS = tuple(
    [f"{m}_{c}" for m in ("mean", "std", "skew", "kurt") for c in ("r", "g", "b")]
    + [f"lbp_u{k:02d}" for k in range(9)]
    + ["lbp_r00", "lbp_r04", "lbp_r08"]
    + list(_HOG_LABELS)
)

SIMPLIFIED_LABELS = (
    "mean_r", "mean_g", "mean_b",
    "value_std", "value_skew", "value_kurt",
    "lbp_flat", "lbp_edge", "lbp_corner",
) + _HOG_LABELS

# ones-count membership of the semantic triple; the rest is dropped
_SEM_FLAT = frozenset({0, 1, 15, 16})
_SEM_EDGE = frozenset({7, 8, 9})
_SEM_CORNER = frozenset({3, 4, 5, 11, 12, 13})

# 24 orientation bins centered at b*pi/24 fold into 5 superbins
_SUPERBIN_OF = np.full(HOG_BINS, 4, dtype=np.int64)
_SUPERBIN_OF[[0]] = 0          # vertical structure: horizontal gradient
_SUPERBIN_OF[[12]] = 1         # horizontal structure
_SUPERBIN_OF[[6, 18]] = 2      # 45-degree diagonals
_SUPERBIN_OF[[4, 8, 16, 20]] = 3  # pi/6, pi/3, 2pi/3, 5pi/6


def _moments(x: np.ndarray) -> tuple[float, float, float, float, bool]:
    """Population mean/std/skew/kurtosis; constant data flags degenerate."""
    x = np.asarray(x, dtype=np.float64).ravel()
    mu = float(x.mean())
    if x.min() == x.max():
        return mu, 0.0, 0.0, 0.0, True
    sd = float(np.sqrt(np.mean((x - mu) ** 2)))
    if sd == 0.0:
        return mu, 0.0, 0.0, 0.0, True
    z = (x - mu) / sd
    return mu, sd, float(np.mean(z**3)), float(np.mean(z**4)), False


def color_moments(channels: np.ndarray) -> tuple[np.ndarray, list[bool]]:
    """First four moments per channel, metric-major order.

    Returns ([mean_r, mean_g, mean_b, std_r, ..., kurt_b], flags) where
    flags marks channels that were constant (their std/skew/kurt are 0).
    """
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim != 3 or channels.shape[2] != 3:
        raise ConfigError("expected an H x W x 3 channel stack")
    stats = [_moments(channels[:, :, c]) for c in range(3)]
    vec = np.array([s[m] for m in range(4) for s in stats], dtype=np.float64)
    return vec, [s[4] for s in stats]


def _lbp_fields(plane: np.ndarray):
    """Per-interior-pixel ones count, transition count, and plateau mask.

    The plane is Otsu-binarized first (already-binary input passes
    through unchanged up to the all-background/all-foreground
    equivalence).  Sample values at the 16 circle points reduce to
    boolean support queries, so every comparison is exact.
    """
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ConfigError("expected a 2-D plane")
    side = 2 * LBP_RADIUS + 1
    if plane.shape[0] < side or plane.shape[1] < side:
        raise TexelTooSmallError(f"texture window needs at least {side}x{side} pixels")
    binary, _ = binarize(plane.astype(np.uint8, copy=False))
    fg = binary > 0
    m = LBP_RADIUS
    ih = fg.shape[0] - 2 * m
    iw = fg.shape[1] - 2 * m
    center = fg[m : m + ih, m : m + iw]
    bits = np.empty((LBP_POINTS, ih, iw), dtype=bool)
    plateau = np.ones((ih, iw), dtype=bool)
    for k, corners in enumerate(sampling_supports(LBP_POINTS, float(LBP_RADIUS))):
        views = [fg[m + cy : m + cy + ih, m + cx : m + cx + iw] for cx, cy in corners]
        any_fg = views[0].copy()
        all_fg = views[0].copy()
        for v in views[1:]:
            any_fg |= v
            all_fg &= v
        bits[k] = ~center & any_fg
        plateau &= np.where(center, all_fg, ~any_fg)
    ones = bits.sum(axis=0, dtype=np.int16)
    trans = (bits != np.roll(bits, -1, axis=0)).sum(axis=0, dtype=np.int16)
    return ones, trans, plateau


def lbp_histogram(plane: np.ndarray) -> np.ndarray:
    """12-bin rotation-invariant pattern histogram, L1-normalized.

    Bins 0..8 hold the folded ones-count keys min(k, 16-k); bin 9 takes
    key-0 patterns that are strict extrema rather than plateaus, bins 10
    and 11 take the non-uniform (more than 2 circular transitions)
    patterns of keys 4 and 8.
    """
    ones, trans, plateau = _lbp_fields(plane)
    folded = np.minimum(ones, LBP_POINTS - ones).astype(np.int64)
    idx = folded.copy()
    idx[(folded == 0) & ~plateau] = 9
    idx[(folded == 4) & (trans > 2)] = 10
    idx[(folded == 8) & (trans > 2)] = 11
    hist = np.bincount(idx.ravel(), minlength=12).astype(np.float64)
    return hist / hist.sum()


def lbp_semantic(plane: np.ndarray) -> tuple[np.ndarray, bool]:
    """(flat, edge, corner) shares among the classified patterns.

    Ones-counts 0/1/15/16 read as flat, 7/8/9 as edge, 3/4/5/11/12/13
    as corner; everything else is dropped before renormalization.  If
    nothing classifies, returns zeros with a degenerate flag.
    """
    ones, _, _ = _lbp_fields(plane)
    flat = int(np.isin(ones, list(_SEM_FLAT)).sum())
    edge = int(np.isin(ones, list(_SEM_EDGE)).sum())
    corner = int(np.isin(ones, list(_SEM_CORNER)).sum())
    total = flat + edge + corner
    if total == 0:
        return np.zeros(3), True
    return np.array([flat, edge, corner], dtype=np.float64) / total, False


def hog_superbins(gray: np.ndarray) -> tuple[np.ndarray, bool]:
    """Magnitude-weighted orientation mass in 5 superbins, L1-normalized.

    Central differences, unsigned orientations folded mod pi into 24
    bins centered at b*pi/24.  A gradient-free tile returns zeros with
    a degenerate flag.
    """
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ConfigError("expected a 2-D plane")
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        raise TexelTooSmallError("gradient window needs at least 3x3 pixels")
    gx = (gray[1:-1, 2:] - gray[1:-1, :-2]) / 2.0
    gy = (gray[2:, 1:-1] - gray[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy).ravel()
    if not np.any(mag > 0):
        return np.zeros(5), True
    theta = np.mod(np.arctan2(gy, gx).ravel(), np.pi)
    bins = np.rint(theta / (np.pi / HOG_BINS)).astype(np.int64) % HOG_BINS
    hist24 = np.bincount(bins, weights=mag, minlength=HOG_BINS)
    hist5 = np.bincount(_SUPERBIN_OF, weights=hist24, minlength=5)
    return hist5 / hist5.sum(), False


@dataclass
class FeatureVector:
    """Descriptor values plus bookkeeping flags."""

    values: np.ndarray
    norm_applied: bool
    degenerate: bool


def _assemble(parts: list[np.ndarray], degenerate: bool) -> FeatureVector:
    vec = np.concatenate(parts)
    total = float(np.abs(vec).sum())
    if total == 0.0:
        return FeatureVector(vec, False, True)
    return FeatureVector(vec / total, True, degenerate)


def feature_vector(
    channels: np.ndarray, gray: np.ndarray, binary: np.ndarray | None = None
) -> FeatureVector:
    """Full 29-entry descriptor of one texel.

    `channels` feeds the color moments (normally the per-map z-scored
    planes cut to the tile), `gray` feeds the gradient histogram, and
    `binary` (defaults to Otsu of `gray`) feeds the pattern histogram.
    """
    cm, flags = color_moments(channels)
    if binary is None:
        binary, _ = binarize(np.asarray(gray, dtype=np.uint8))
    lbp = lbp_histogram(binary)
    hog, zero_grad = hog_superbins(gray)
    return _assemble([cm, lbp, hog], any(flags) or zero_grad)


def simplified_vector(
    channels: np.ndarray, gray: np.ndarray, binary: np.ndarray | None = None
) -> FeatureVector:
    """14-entry variant: channel means, value-plane moments, semantic
    LBP triple, gradient superbins."""
    channels = np.asarray(channels, dtype=np.float64)
    if channels.ndim != 3 or channels.shape[2] != 3:
        raise ConfigError("expected an H x W x 3 channel stack")
    means = channels.reshape(-1, 3).mean(axis=0)
    value = channels.sum(axis=2)
    _, sd, sk, ku, flat_value = _moments(value)
    if binary is None:
        binary, _ = binarize(np.asarray(gray, dtype=np.uint8))
    sem, sem_flag = lbp_semantic(binary)
    hog, zero_grad = hog_superbins(gray)
    parts = [means, np.array([sd, sk, ku]), sem, hog]
    return _assemble(parts, flat_value or sem_flag or zero_grad)


@dataclass
class MapPlanes:
    """Per-map planes shared by every texel cut from that map."""

    channels: np.ndarray  # H x W x 3 float64, z-scored per channel
    gray: np.ndarray      # H x W uint8
    binary: np.ndarray    # H x W uint8, single Otsu pass for the map
    flat_channels: tuple[bool, bool, bool]
    flat_binary: bool


def prepare_map(img: np.ndarray) -> MapPlanes:
    """Normalize once per map: z-score channels, grayscale, binarize.

    A zero-variance channel becomes an all-zero plane and is flagged
    instead of aborting the sweep.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ConfigError("expected an H x W x 3 image")
    channels = np.empty(img.shape, dtype=np.float64)
    flat = []
    for c in range(3):
        try:
            channels[:, :, c] = zscore_channel(img[:, :, c])
            flat.append(False)
        except ZeroVarianceError:
            channels[:, :, c] = 0.0
            flat.append(True)
    gray = to_grayscale(img)
    binary, flat_binary = binarize(gray)
    return MapPlanes(channels, gray, binary, tuple(flat), flat_binary)


def extract_map_features(
    img: np.ndarray,
    origins: list[tuple[int, int]],
    size: int,
    simplified: bool = False,
) -> np.ndarray:
    """Descriptor matrix (len(origins) x 29 or x 14) for one map's tiles."""
    planes = prepare_map(img)
    build = simplified_vector if simplified else feature_vector
    width = len(SIMPLIFIED_LABELS) if simplified else len(FEATURE_LABELS)
    out = np.empty((len(origins), width), dtype=np.float64)
    for i, (x, y) in enumerate(origins):
        win = (slice(y, y + size), slice(x, x + size))
        fv = build(planes.channels[win], planes.gray[win], planes.binary[win])
        out[i] = fv.values
    return out


def write_features_csv(
    path,
    rows: list[tuple[str, int, int, str]],
    matrix: np.ndarray,
    sidecar: bool = True,
) -> None:
    """Feature table: header map_id,x,y,class,f00..; floats use the
    shortest round-trip repr.  A .npy sidecar mirrors the matrix bit
    for bit."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != len(rows):
        raise ConfigError("feature matrix does not match the row index")
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["map_id", "x", "y", "class"]
            + [f"f{j:02d}" for j in range(matrix.shape[1])]
        )
        for (map_id, x, y, cls), vec in zip(rows, matrix):
            writer.writerow([map_id, x, y, cls or ""] + [repr(float(v)) for v in vec])
    if sidecar:
        np.save(path.with_suffix(".npy"), matrix)


def read_features_csv(path) -> tuple[list[tuple[str, int, int, str]], np.ndarray]:
    """Read a feature table; prefers the exact .npy sidecar when present."""
    path = Path(path)
    rows: list[tuple[str, int, int, str]] = []
    values: list[list[float]] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:4] != ["map_id", "x", "y", "class"]:
            raise InputError(f"{path}: not a feature table")
        for line in reader:
            rows.append((line[0], int(line[1]), int(line[2]), line[3]))
            values.append([float(v) for v in line[4:]])
    matrix = np.array(values, dtype=np.float64)
    sidecar = path.with_suffix(".npy")
    if sidecar.exists():
        exact = np.load(sidecar)
        if exact.shape == matrix.shape:
            matrix = exact.astype(np.float64)
    return rows, matrix
