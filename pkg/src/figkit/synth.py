"""Procedural mini-corpus: small map-like rasters with exact labels.

Each synthetic sheet has a decorated frame band, pale roads, hatched
building blocks, a wavy water body, and stippled open ground, drawn
from one seeded RNG so the corpus regenerates byte-identically.  The
class geometry is known exactly, which yields ground-truth labels and
a deterministic corrupted prediction per map for evaluation demos.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import ONTOLOGY_5, MapRecord, save_manifest
from .errors import ConfigError
from .raster import save_png

__all__ = ["generate_corpus"]

_REGION_CYCLE = ("Western Europe", "North America", "East Asia")
_FORM_CYCLE = ("regular", "irregular", "mixed")

_FRAME, _ROAD, _BLOCKS, _WATER, _NONBUILT = range(5)


def _class_masks(size: int, rng: np.random.Generator) -> np.ndarray:
    """Class-index geometry for one sheet: rasterized back to front."""
    yy, xx = np.mgrid[0:size, 0:size]
    masks = np.full((size, size), _NONBUILT, dtype=np.int16)

    # water: one wavy-edged band entering from a random side
    side = int(rng.integers(4))
    depth = int(rng.integers((2 * size) // 5, size // 2 - 20))
    wave = (12 * np.sin(yy / 23.0 + float(rng.uniform(0, 6)))).astype(np.int64)
    if side == 0:
        water = xx < depth + wave
    elif side == 1:
        water = xx > size - depth - wave
    elif side == 2:
        water = yy < depth + (12 * np.sin(xx / 23.0)).astype(np.int64)
    else:
        water = yy > size - depth - (12 * np.sin(xx / 23.0)).astype(np.int64)
    masks[water] = _WATER

    # building districts: rectangles snapped near the 50 px tile lattice
    # so several tiles are wholly built-up, plus a few free rectangles
    lattice = np.arange(50, size - 100, 50)
    n_district = min(int(rng.integers(5, 9)), lattice.size**2)
    cells = rng.choice(lattice.size**2, size=n_district, replace=False)
    rects = [
        (lattice[c % lattice.size] - 6, lattice[c // lattice.size] - 6, 62, 62)
        for c in cells
    ]
    for _ in range(int(rng.integers(3, 6))):
        bw = int(rng.integers(40, 80))
        bh = int(rng.integers(40, 80))
        rects.append((int(rng.integers(0, size - bw)), int(rng.integers(0, size - bh)), bw, bh))
    for bx, by, bw, bh in rects:
        block = np.zeros_like(water)
        block[max(by, 0) : by + bh, max(bx, 0) : bx + bw] = True
        masks[block & ~water] = _BLOCKS

    # roads cut across everything except the frame
    for _ in range(int(rng.integers(2, 4))):
        w = int(rng.integers(7, 13))
        pos = int(rng.integers(size // 6, 5 * size // 6))
        masks[:, pos : pos + w] = _ROAD
    for _ in range(int(rng.integers(2, 4))):
        w = int(rng.integers(7, 13))
        pos = int(rng.integers(size // 6, 5 * size // 6))
        masks[pos : pos + w, :] = _ROAD

    fw = int(rng.integers(30, 43))
    border = (xx < fw) | (xx >= size - fw) | (yy < fw) | (yy >= size - fw)
    masks[border] = _FRAME
    return masks


def _render_sheet(masks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Texture the class geometry into a map-like RGB image."""
    size = masks.shape[0]
    yy, xx = np.mgrid[0:size, 0:size]
    jitter = rng.integers(-8, 9, size=3)
    paper = np.array([224, 213, 185], dtype=np.float64) + jitter
    img = np.empty((size, size, 3), dtype=np.float64)
    img[:] = paper

    road = np.array([238, 233, 219], dtype=np.float64) + jitter
    block = np.array([213, 178, 158], dtype=np.float64) + jitter
    water = np.array([187, 203, 214], dtype=np.float64) + jitter
    frame = paper * 0.96

    img[masks == _ROAD] = road
    img[masks == _BLOCKS] = block
    img[masks == _WATER] = water
    img[masks == _FRAME] = frame

    # diagonal hatching inside blocks
    hatch = ((xx + yy) % 9 < 2) & (masks == _BLOCKS)
    img[hatch] = [126, 95, 82]
    # wavy horizontal strokes over water
    stroke_phase = (yy + (7 * np.sin(xx / 16.0)).astype(np.int64)) % 13
    strokes = (stroke_phase < 2) & (masks == _WATER)
    img[strokes] = [121, 144, 166]
    # stipple dots on open ground
    dots = (rng.random(masks.shape) < 0.012) & (masks == _NONBUILT)
    img[dots] = [105, 98, 84]
    # frame rules and title-like dashes
    fw = int(np.flatnonzero(masks[size // 2] != _FRAME)[0])
    for offset in (2, fw - 3):
        img[offset, offset : size - offset] = [40, 36, 32]
        img[size - 1 - offset, offset : size - offset] = [40, 36, 32]
        img[offset : size - offset, offset] = [40, 36, 32]
        img[offset : size - offset, size - 1 - offset] = [40, 36, 32]
    band_y = size - fw // 2
    x0 = fw
    while x0 < size - fw:
        dash = int(rng.integers(8, 26))
        img[band_y : band_y + 2, x0 : min(x0 + dash, size - fw)] = [52, 47, 41]
        x0 += dash + int(rng.integers(5, 14))

    img += rng.normal(0.0, 2.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _corrupt(masks: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """A plausible flawed prediction: shifted roads plus two confused
    rectangles."""
    size = masks.shape[0]
    pred = masks.copy()
    road = masks == _ROAD
    pred[road] = _BLOCKS
    pred[np.roll(road, (2, -3), axis=(0, 1))] = _ROAD
    for _ in range(2):
        w = int(rng.integers(24, 48))
        h = int(rng.integers(24, 48))
        x = int(rng.integers(0, size - w))
        y = int(rng.integers(0, size - h))
        patch = pred[y : y + h, x : x + w]
        patch[patch == _WATER] = _NONBUILT
        patch[patch == _BLOCKS] = _NONBUILT
    return pred


def generate_corpus(
    out_dir, seed: int = 0, n_maps: int = 3, size: int = 360
) -> Path:
    """Write images/, labels/, preds/ and manifest.json; returns the
    manifest path."""
    if n_maps < 1:
        raise ConfigError("n_maps must be >= 1")
    if size < 120:
        raise ConfigError("size must be >= 120")
    out_dir = Path(out_dir)
    for sub in ("images", "labels", "preds"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    anchors = np.asarray(ONTOLOGY_5.anchors, dtype=np.uint8)
    records = []
    meta = {"generator": "figkit synth", "seed": str(seed)}
    for i in range(n_maps):
        rng = np.random.default_rng([seed, i])
        masks = _class_masks(size, rng)
        sheet = _render_sheet(masks, rng)
        pred = _corrupt(masks, np.random.default_rng([seed, 999, i]))
        map_id = f"synth{i:02d}"
        save_png(sheet, out_dir / "images" / f"{map_id}.png", meta)
        save_png(anchors[masks], out_dir / "labels" / f"{map_id}.png", meta)
        save_png(anchors[pred], out_dir / "preds" / f"{map_id}.png", meta)
        records.append(
            MapRecord(
                map_id=map_id,
                image_path=f"images/{map_id}.png",
                label_path=f"labels/{map_id}.png",
                year=1820 + 50 * (i % 4),
                region=_REGION_CYCLE[i % len(_REGION_CYCLE)],
                urban_form=_FORM_CYCLE[i % len(_FORM_CYCLE)],
            )
        )
    manifest = out_dir / "manifest.json"
    save_manifest(records, manifest)
    return manifest
