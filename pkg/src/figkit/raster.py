"""Raster primitives: image I/O, grayscale, Otsu binarization, z-scoring.

Also hosts the image-degradation chain (grayscale, binary, textureless
binary) and the circular-neighborhood sampling geometry shared with the
texture descriptors.  All arrays are numpy, images are H x W x 3 uint8
unless stated otherwise.
"""

from __future__ import annotations

import math

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .errors import ConfigError, InputError, ZeroVarianceError

__all__ = [
    "load_rgb",
    "save_png",
    "to_grayscale",
    "otsu_threshold",
    "binarize",
    "zscore_channel",
    "circle_offsets",
    "sampling_supports",
    "lbp_code_map",
    "ABLATION_MODES",
    "ablate",
]

ABLATION_MODES = ("reference", "gray", "binary", "textureless")


def load_rgb(path) -> np.ndarray:
    """Load a PNG or JPEG as an H x W x 3 uint8 array.

    16-bit grayscale PNGs are down-converted by keeping the high byte.
    """
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise InputError(f"cannot decode image {path}: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise InputError(f"empty image {path}")
    if img.mode in ("I", "I;16", "I;16B", "I;16L"):
        arr = np.asarray(img, dtype=np.int64)
        arr = np.clip(arr >> 8, 0, 255).astype(np.uint8)
        return np.repeat(arr[:, :, None], 3, axis=2)
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_png(img: np.ndarray, path, meta: dict | None = None) -> None:
    """Write an 8-bit non-interlaced PNG; reruns are byte-identical.

    meta entries become tEXt chunks, written in sorted key order so the
    output stream never depends on dict construction order.
    """
    arr = np.ascontiguousarray(img)
    if arr.dtype != np.uint8:
        raise ConfigError("save_png expects uint8 data")
    pil = Image.fromarray(arr)
    info = PngInfo()
    if meta:
        for key in sorted(meta):
            info.add_text(str(key), str(meta[key]))
    pil.save(path, format="PNG", pnginfo=info)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma, rounded to nearest and clipped to [0, 255]."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ConfigError("expected an H x W x 3 image")
    if img.size == 0:
        raise InputError("empty image")
    f = img.astype(np.float64)
    # Fixed left-to-right evaluation keeps the result reproducible bit for
    # bit; a dot product would leave the summation order to the BLAS.
    g = f[..., 0] * 0.299 + f[..., 1] * 0.587 + f[..., 2] * 0.114
    return np.clip(np.rint(g), 0, 255).astype(np.uint8)


def otsu_threshold(gray: np.ndarray) -> tuple[int, bool]:
    """Maximize inter-class variance over the 256-bin histogram.

    Pixels <= t form the background class.  The score comparison runs in
    exact integer arithmetic, so ties resolve to the lowest threshold
    with no float ambiguity.  A constant image is degenerate: returns
    (value, True).
    """
    gray = np.asarray(gray)
    if gray.size == 0:
        raise InputError("empty image")
    if gray.dtype != np.uint8:
        raise ConfigError("otsu_threshold expects uint8 data")
    hist = np.bincount(gray.ravel(), minlength=256)
    nonzero = np.flatnonzero(hist)
    if nonzero.size == 1:
        return int(nonzero[0]), True
    n = int(hist.sum())
    total = int(np.dot(hist, np.arange(256)))
    best_t = 0
    best_num = -1  # score numerator, with denominator best_den
    best_den = 1
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        # between-class variance ~ (S0*n - S*n0)^2 / (n0*n1), common
        # factors dropped; cross-multiplied comparison stays exact
        num = (s0 * n - total * n0) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    return best_t, False


def binarize(gray: np.ndarray) -> tuple[np.ndarray, bool]:
    """Otsu split into {0, 255}; pixels strictly above t are foreground.

    Degenerate (constant) input maps to all-foreground so downstream
    texture passes still see a valid binary plane.
    """
    t, degenerate = otsu_threshold(gray)
    if degenerate:
        return np.full(gray.shape, 255, dtype=np.uint8), True
    return np.where(gray > t, 255, 0).astype(np.uint8), False


def zscore_channel(plane: np.ndarray) -> np.ndarray:
    """Center and scale one channel by its population deviation."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.size < 2:
        raise ConfigError("zscore_channel needs at least 2 pixels")
    if plane.min() == plane.max():
        raise ZeroVarianceError("constant channel cannot be z-scored")
    mu = plane.mean()
    sigma = math.sqrt(np.mean((plane - mu) ** 2))
    if sigma == 0.0:
        raise ZeroVarianceError("constant channel cannot be z-scored")
    return (plane - mu) / sigma


def circle_offsets(n_points: int, radius: float) -> list[tuple[float, float]]:
    """(dx, dy) sample offsets on a circle with exact 4-fold symmetry.

    Only the first quadrant is built from trigonometry; the rest are
    exact 90-degree rotations (dx, dy) -> (-dy, dx), so a rotated image
    sees a bit-identical sampling pattern.
    """
    if n_points % 4 != 0:
        raise ConfigError("n_points must be a multiple of 4")
    quarter = []
    for k in range(n_points // 4):
        ang = 2.0 * math.pi * k / n_points
        dx = radius * math.cos(ang)
        dy = radius * math.sin(ang)
        # snap axis-aligned samples so their fractional part is exactly 0
        if abs(dx - round(dx)) < 1e-9:
            dx = float(round(dx))
        if abs(dy - round(dy)) < 1e-9:
            dy = float(round(dy))
        quarter.append((dx, dy))
    out = list(quarter)
    prev = quarter
    for _ in range(3):
        prev = [(-dy, dx) for dx, dy in prev]
        out.extend(prev)
    return out


def sampling_supports(n_points: int, radius: float) -> list[list[tuple[int, int]]]:
    """Integer corner offsets with positive bilinear weight, per sample.

    On a binary image the interpolated value v at a sample point obeys
    v > 0 iff some support corner is foreground and v == max iff all of
    them are, which turns bilinear comparisons into exact boolean logic.
    """
    supports = []
    for dx, dy in circle_offsets(n_points, radius):
        x0 = math.floor(dx)
        y0 = math.floor(dy)
        xs = (x0,) if dx - x0 == 0.0 else (x0, x0 + 1)
        ys = (y0,) if dy - y0 == 0.0 else (y0, y0 + 1)
        supports.append([(cx, cy) for cy in ys for cx in xs])
    return supports


def _padded_corner_views(fg: np.ndarray, margin: int):
    """Edge-replicated pad plus a view factory for corner-shifted planes."""
    padded = np.pad(fg, margin, mode="edge")
    h, w = fg.shape

    def view(cx: int, cy: int) -> np.ndarray:
        return padded[margin + cy : margin + cy + h, margin + cx : margin + cx + w]

    return view


def lbp_code_map(binary: np.ndarray, radius: int) -> np.ndarray:
    """Raw local-binary-pattern codes for every pixel of a binary plane.

    P = 8 * radius samples; bit k is set when the interpolated neighbor
    value strictly exceeds the center.  Nonzero pixels count as
    foreground.  Border samples clamp to the nearest edge pixel, so the
    output covers the full frame.  Constant input yields all-zero codes.
    """
    binary = np.asarray(binary)
    if binary.ndim != 2 or binary.size == 0:
        raise ConfigError("lbp_code_map expects a non-empty 2-D plane")
    if radius < 1:
        raise ConfigError("radius must be >= 1")
    n_points = 8 * radius
    fg = binary > 0
    margin = radius + 1
    view = _padded_corner_views(fg, margin)
    codes = np.zeros(binary.shape, dtype=np.uint32)
    center_bg = ~fg
    for k, corners in enumerate(sampling_supports(n_points, float(radius))):
        any_fg = view(*corners[0]).copy()
        for cx, cy in corners[1:]:
            any_fg |= view(cx, cy)
        # neighbor > center is only possible over a background center
        codes |= (center_bg & any_fg).astype(np.uint32) << np.uint32(k)
    return codes


def ablate(img: np.ndarray, mode: str) -> tuple[np.ndarray, bool]:
    """Apply one step of the figuration-removal chain.

    reference   identity copy
    gray        BT.601 grayscale replicated to 3 channels
    binary      grayscale then Otsu to {0, 255}
    textureless binary, then the raw LBP code map (radius 3, 24 samples)
                rescaled to [0, 255] and Otsu-binarized a second time

    Returns (image, degenerate) where the flag records any Otsu pass
    that saw a constant plane (convention: constant maps to foreground).
    """
    if mode not in ABLATION_MODES:
        raise ConfigError(f"unknown ablation mode {mode!r}")
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ConfigError("expected an H x W x 3 image")
    if mode == "reference":
        return img.astype(np.uint8, copy=True), False
    gray = to_grayscale(img)
    if mode == "gray":
        return np.repeat(gray[:, :, None], 3, axis=2), False
    binary, degenerate = binarize(gray)
    if mode == "binary":
        return np.repeat(binary[:, :, None], 3, axis=2), degenerate
    codes = lbp_code_map(binary, radius=3)
    scale = 255.0 / float(2**24 - 1)
    rescaled = np.rint(codes.astype(np.float64) * scale).astype(np.uint8)
    out, degenerate2 = binarize(rescaled)
    return np.repeat(out[:, :, None], 3, axis=2), degenerate or degenerate2
