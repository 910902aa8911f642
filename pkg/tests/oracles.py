"""Independent reference implementations used as test oracles.

Everything here is written from the definitions, not from the library
code: exhaustive scans, exact rational arithmetic, and plain per-pixel
loops.  Slow is fine; agreeing with the library for the wrong reason is
not, so no code is shared with src/.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

__all__ = [
    "oracle_offsets",
    "oracle_otsu",
    "oracle_code_map",
    "oracle_lbp_stats",
    "oracle_lbp_histogram",
    "oracle_hog",
    "oracle_kurtosis",
    "oracle_hist32",
    "oracle_smooth3",
    "oracle_confusion",
]


def oracle_offsets(n_points: int, radius: float) -> list[tuple[float, float]]:
    """Circle sample offsets: one quadrant from libm, three exact turns."""
    quarter = []
    for k in range(n_points // 4):
        a = 2.0 * math.pi * k / n_points
        dx, dy = radius * math.cos(a), radius * math.sin(a)
        if abs(dx - round(dx)) < 1e-9:
            dx = float(round(dx))
        if abs(dy - round(dy)) < 1e-9:
            dy = float(round(dy))
        quarter.append((dx, dy))
    pts = list(quarter)
    prev = quarter
    for _ in range(3):
        prev = [(-dy, dx) for dx, dy in prev]
        pts.extend(prev)
    return pts


def oracle_otsu(gray: np.ndarray) -> int:
    """Exhaustive between-class variance maximizer in exact rationals."""
    hist = np.bincount(np.asarray(gray).ravel(), minlength=256)
    total = int(hist.sum())
    levels = np.arange(256)
    best_t, best_score = 0, Fraction(-1)
    for t in range(256):
        n0 = int(hist[: t + 1].sum())
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        mu0 = Fraction(int((hist[: t + 1] * levels[: t + 1]).sum()), n0)
        mu1 = Fraction(int((hist[t + 1 :] * levels[t + 1 :]).sum()), n1)
        score = Fraction(n0) * Fraction(n1) * (mu0 - mu1) ** 2
        if score > best_score:
            best_score, best_t = score, t
    return best_t


def _bilinear_exact(fg: np.ndarray, cy: int, cx: int, dx: float, dy: float) -> Fraction:
    fx, fy = Fraction(dx), Fraction(dy)
    x0, y0 = math.floor(fx), math.floor(fy)
    ax, ay = fx - x0, fy - y0
    value = Fraction(0)
    for ix, wx in ((x0, 1 - ax), (x0 + 1, ax)):
        for iy, wy in ((y0, 1 - ay), (y0 + 1, ay)):
            if wx and wy:
                value += wx * wy * int(fg[cy + iy, cx + ix])
    return value


def oracle_code_map(binary: np.ndarray, radius: int) -> np.ndarray:
    """Per-pixel codes via exact bilinear sampling on an edge-padded plane."""
    fg = (np.asarray(binary) != 0).astype(np.int64)
    margin = radius + 1
    padded = np.pad(fg, margin, mode="edge")
    offsets = oracle_offsets(8 * radius, float(radius))
    h, w = fg.shape
    out = np.zeros((h, w), dtype=np.uint32)
    for y in range(h):
        for x in range(w):
            center = Fraction(int(padded[y + margin, x + margin]))
            code = 0
            for k, (dx, dy) in enumerate(offsets):
                if _bilinear_exact(padded, y + margin, x + margin, dx, dy) > center:
                    code |= 1 << k
            out[y, x] = code
    return out


def oracle_lbp_stats(binary: np.ndarray) -> list[tuple[int, int, bool]]:
    """(ones, transitions, plateau) per interior pixel, 16 samples, radius 2."""
    fg = (np.asarray(binary) != 0).astype(np.int64)
    offsets = oracle_offsets(16, 2.0)
    h, w = fg.shape
    out = []
    for cy in range(2, h - 2):
        for cx in range(2, w - 2):
            center = Fraction(int(fg[cy, cx]))
            bits = []
            plateau = True
            for dx, dy in offsets:
                value = _bilinear_exact(fg, cy, cx, dx, dy)
                bits.append(value > center)
                plateau = plateau and value == center
            ones = sum(bits)
            trans = sum(bits[k] != bits[(k + 1) % 16] for k in range(16))
            out.append((ones, trans, plateau))
    return out


def oracle_lbp_histogram(binary: np.ndarray) -> np.ndarray:
    counts = [0] * 12
    for ones, trans, plateau in oracle_lbp_stats(binary):
        folded = min(ones, 16 - ones)
        if folded == 0 and not plateau:
            b = 9
        elif folded == 4 and trans > 2:
            b = 10
        elif folded == 8 and trans > 2:
            b = 11
        else:
            b = folded
        counts[b] += 1
    return np.array(counts, dtype=np.float64) / sum(counts)


_SUPERBIN = {0: 0, 12: 1, 6: 2, 18: 2, 4: 3, 8: 3, 16: 3, 20: 3}


def oracle_hog(gray: np.ndarray) -> tuple[np.ndarray, bool]:
    g = np.asarray(gray, dtype=np.float64)
    h, w = g.shape
    acc = [0.0] * 5
    seen = False
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            gx = (g[y, x + 1] - g[y, x - 1]) / 2.0
            gy = (g[y + 1, x] - g[y - 1, x]) / 2.0
            mag = math.hypot(gx, gy)
            if mag > 0:
                seen = True
            theta = math.atan2(gy, gx) % math.pi
            b = round(theta / (math.pi / 24)) % 24
            acc[_SUPERBIN.get(b, 4)] += mag
    if not seen:
        return np.zeros(5), True
    out = np.array(acc, dtype=np.float64)
    return out / out.sum(), False


def oracle_kurtosis(x) -> float:
    """Fourth standardized population moment in exact rationals."""
    vals = [Fraction(v) for v in x]
    n = len(vals)
    mu = sum(vals) / n
    d2 = sum((v - mu) ** 2 for v in vals) / n
    d4 = sum((v - mu) ** 4 for v in vals) / n
    return float(d4 / d2**2)


def oracle_hist32(values, lo: float, hi: float) -> list[int]:
    """32 equal bins over [lo, hi]; [edge, edge) except the last includes hi."""
    counts = [0] * 32
    width = (hi - lo) / 32.0
    for v in values:
        b = 31
        for k in range(31):
            if v < lo + (k + 1) * width:
                b = k
                break
        counts[b] += 1
    return counts


def oracle_smooth3(counts) -> list[float]:
    """Mirror-padded centered 3-point mean."""
    ext = [counts[1], *counts, counts[-2]]
    return [(ext[i] + ext[i + 1] + ext[i + 2]) / 3.0 for i in range(len(counts))]


def oracle_confusion(gt: np.ndarray, pred: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((k, k), dtype=np.int64)
    for a, b in zip(np.asarray(gt).ravel(), np.asarray(pred).ravel()):
        out[int(a), int(b)] += 1
    return out
