"""Rendering: radial convergence plots, correlation heatmaps, montages.

SVG documents are assembled as plain strings with fixed 2-decimal
coordinate formatting, so identical inputs always produce identical
bytes.  The montage is a raw RGB array; callers decide how to save it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np
from PIL import Image

from .analysis import CorrelationMatrix, GridLayout
from .corpus import Texel
from .errors import ConfigError, InputError, LayoutMismatchError

__all__ = [
    "KurtographSpec",
    "kurtograph_geometry",
    "render_kurtograph",
    "render_heatmap",
    "render_montage",
]

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
)

_SIZE = 640
_CENTER = _SIZE / 2
_R_INNER = 60.0
_R_OUTER = 260.0


@dataclass
class KurtographSpec:
    """Series of per-feature convergence values to overlay radially.

    alpha shifts every value before the log so the smallest plotted
    value stays at or above 0.1; when omitted it is derived as
    max(0, 0.1 - min value).
    """

    series: list[tuple[str, np.ndarray]]
    labels: tuple[str, ...]
    alpha: float | None = None


def kurtograph_geometry(
    spec: KurtographSpec,
) -> tuple[np.ndarray, float, float]:
    """Spoke radii for each series, the applied alpha, and the radial
    scale in pixels per log10 decade.

    Radii are affine in log10(value + alpha), mapping the pooled
    [min, max] onto [inner, outer] ring; a spread-free plot sits on the
    outer ring.
    """
    if not spec.series:
        raise InputError("kurtograph needs at least one series")
    f = len(spec.labels)
    values = []
    for name, vec in spec.series:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (f,):
            raise ConfigError(f"series {name!r} does not have {f} values")
        values.append(vec)
    stack = np.stack(values)
    alpha = spec.alpha
    if alpha is None:
        alpha = max(0.0, 0.1 - float(stack.min()))
    if stack.min() + alpha < 0.1 - 1e-12:
        raise ConfigError("alpha leaves values below the 0.1 log floor")
    logs = np.log10(stack + alpha)
    lo = float(logs.min())
    hi = float(logs.max())
    if hi - lo < 1e-12:
        return np.full(stack.shape, _R_OUTER), alpha, 0.0
    scale = (_R_OUTER - _R_INNER) / (hi - lo)
    return _R_INNER + (logs - lo) * scale, alpha, scale


def _spoke_xy(radius: float, index: int, count: int) -> tuple[float, float]:
    ang = -math.pi / 2 + 2.0 * math.pi * index / count
    return _CENTER + radius * math.cos(ang), _CENTER + radius * math.sin(ang)


def _meta_comment(meta: dict | None) -> str:
    if not meta:
        return ""
    blob = json.dumps(meta, sort_keys=True).replace("--", "- -")
    return f"<!-- figkit {escape(blob)} -->\n"


def render_kurtograph(spec: KurtographSpec, meta: dict | None = None) -> str:
    """Radial log-scaled plot: one closed polyline per series."""
    radii, alpha, _ = kurtograph_geometry(spec)
    f = len(spec.labels)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        _meta_comment(meta),
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">\n',
        f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>\n',
    ]
    for ring in (_R_INNER, (_R_INNER + _R_OUTER) / 2, _R_OUTER):
        parts.append(
            f'<circle cx="{_CENTER:.2f}" cy="{_CENTER:.2f}" r="{ring:.2f}" '
            'fill="none" stroke="#cccccc" stroke-width="1"/>\n'
        )
    for i, label in enumerate(spec.labels):
        x, y = _spoke_xy(_R_OUTER, i, f)
        parts.append(
            f'<line x1="{_CENTER:.2f}" y1="{_CENTER:.2f}" x2="{x:.2f}" y2="{y:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>\n'
        )
        lx, ly = _spoke_xy(_R_OUTER + 22, i, f)
        parts.append(
            f'<text x="{lx:.2f}" y="{ly:.2f}" font-size="11" font-family="sans-serif" '
            f'text-anchor="middle" dominant-baseline="middle">{escape(label)}</text>\n'
        )
    for s, (name, _) in enumerate(spec.series):
        color = _PALETTE[s % len(_PALETTE)]
        pts = " ".join(
            "{:.2f},{:.2f}".format(*_spoke_xy(float(radii[s, i]), i, f))
            for i in range(f)
        )
        parts.append(
            f'<polygon points="{pts}" fill="{color}" fill-opacity="0.10" '
            f'stroke="{color}" stroke-width="2"/>\n'
        )
        ly = 24 + 18 * s
        parts.append(
            f'<line x1="16" y1="{ly}" x2="40" y2="{ly}" stroke="{color}" stroke-width="3"/>\n'
            f'<text x="46" y="{ly + 4}" font-size="12" font-family="sans-serif">'
            f"{escape(name)}</text>\n"
        )
    parts.append(
        f'<text x="{_SIZE - 10}" y="{_SIZE - 10}" font-size="10" font-family="sans-serif" '
        f'text-anchor="end">alpha = {alpha:.4f}, log10 radial scale</text>\n'
    )
    parts.append("</svg>\n")
    return "".join(parts)


def _diverging_color(r: float) -> str:
    r = min(1.0, max(-1.0, r))
    white = np.array([247.0, 247.0, 247.0])
    if r < 0:
        target = np.array([33.0, 102.0, 172.0])
        rgb = white + (-r) * (target - white)
    else:
        target = np.array([178.0, 24.0, 43.0])
        rgb = white + r * (target - white)
    return "#{:02x}{:02x}{:02x}".format(*(int(round(v)) for v in rgb))


def render_heatmap(m: CorrelationMatrix, meta: dict | None = None) -> str:
    """Annotated correlation matrix on a diverging [-1, 1] scale."""
    k = len(m.labels)
    if m.r.shape != (k, k):
        raise ConfigError("correlation matrix is not square")
    cell = 56
    left, top, pad = 190, 120, 20
    width = left + k * cell + pad
    height = top + k * cell + pad
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        _meta_comment(meta),
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n',
        f'<rect width="{width}" height="{height}" fill="white"/>\n',
    ]
    names = [f"{c}/{cls}" for c, cls in m.labels]
    for j, name in enumerate(names):
        x = left + j * cell + cell / 2
        parts.append(
            f'<text x="{x:.2f}" y="{top - 8}" font-size="11" font-family="sans-serif" '
            f'text-anchor="start" transform="rotate(-55 {x:.2f} {top - 8})">'
            f"{escape(name)}</text>\n"
        )
    for i, name in enumerate(names):
        y = top + i * cell + cell / 2
        parts.append(
            f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="11" '
            f'font-family="sans-serif" text-anchor="end">{escape(name)}</text>\n'
        )
        for j in range(k):
            r = float(m.r[i, j])
            x = left + j * cell
            y0 = top + i * cell
            fg = "white" if abs(r) > 0.6 else "black"
            parts.append(
                f'<rect x="{x}" y="{y0}" width="{cell}" height="{cell}" '
                f'fill="{_diverging_color(r)}" stroke="#888888" stroke-width="0.5"/>\n'
                f'<text x="{x + cell / 2:.2f}" y="{y0 + cell / 2 + 4:.2f}" font-size="12" '
                f'font-family="sans-serif" text-anchor="middle" fill="{fg}">{r:.2f}</text>\n'
            )
    parts.append("</svg>\n")
    return "".join(parts)


def render_montage(texels: list[Texel], layout: GridLayout, cell: int) -> np.ndarray:
    """Blit each texel into its grid cell; empty cells stay neutral gray."""
    if cell < 1:
        raise ConfigError("cell size must be >= 1")
    if len(texels) != layout.cells.shape[0]:
        raise LayoutMismatchError(
            f"layout places {layout.cells.shape[0]} items, got {len(texels)} texels"
        )
    seen = set()
    canvas = np.full((layout.rows * cell, layout.cols * cell, 3), 128, dtype=np.uint8)
    for texel, (row, col) in zip(texels, layout.cells):
        row, col = int(row), int(col)
        if not (0 <= row < layout.rows and 0 <= col < layout.cols):
            raise LayoutMismatchError(f"cell ({row}, {col}) outside the grid")
        if (row, col) in seen:
            raise LayoutMismatchError(f"cell ({row}, {col}) assigned twice")
        seen.add((row, col))
        tile = np.asarray(texel.pixels, dtype=np.uint8)
        if tile.shape[0] != cell or tile.shape[1] != cell:
            tile = np.asarray(
                Image.fromarray(tile).resize((cell, cell), Image.NEAREST)
            )
        canvas[row * cell : (row + 1) * cell, col * cell : (col + 1) * cell] = tile
    return canvas
