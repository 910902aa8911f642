"""Corpus handling: manifests, class ontologies, label maps, texels.

A corpus is a JSON manifest listing map records plus the rasters they
point to.  Ground truth arrives as color-coded label images; here they
become integer class maps that the tiling and evaluation stages share.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    ManifestError,
    ShapeMismatchError,
    UnknownColorError,
)

__all__ = [
    "Ontology",
    "ONTOLOGY_5",
    "ONTOLOGY_3",
    "ontology_for",
    "REGIONS",
    "URBAN_FORMS",
    "YEAR_MIN",
    "YEAR_MAX",
    "MapRecord",
    "load_manifest",
    "save_manifest",
    "resolve_path",
    "ClassMap",
    "decode_labels",
    "encode_labels",
    "collapse_classes",
    "texel_origins",
    "Texel",
    "extract_texels",
    "assign_texel_class",
    "area_proportions",
]

REGIONS = (
    "Sub-Saharan Africa",
    "North Africa",
    "Eastern Europe and Central Asia",
    "South America",
    "Western Europe",
    "North America",
    "South Asia",
    "Middle East",
    "East Asia",
    "Oceania",
    "Central America",
)

URBAN_FORMS = ("regular", "irregular", "mixed")

YEAR_MIN = 1700
YEAR_MAX = 1994


@dataclass(frozen=True)
class Ontology:
    """A fixed class list with one RGB anchor color per class."""

    name: str
    classes: tuple[str, ...]
    anchors: tuple[tuple[int, int, int], ...]

    @property
    def arity(self) -> int:
        return len(self.classes)

    def index(self, class_name: str) -> int:
        try:
            return self.classes.index(class_name)
        except ValueError:
            raise ConfigError(
                f"class {class_name!r} is not part of ontology {self.name!r}"
            ) from None


ONTOLOGY_5 = Ontology(
    name="built5",
    classes=("frame", "road", "blocks", "water", "non-built"),
    anchors=((0, 0, 0), (255, 255, 255), (255, 0, 255), (0, 0, 255), (0, 255, 255)),
)

ONTOLOGY_3 = Ontology(
    name="struct3",
    classes=("frame", "road", "map-content"),
    anchors=((0, 0, 0), (255, 255, 255), (255, 0, 255)),
)

# class i of the 5-way scheme folds into entry i of the 3-way scheme
_COLLAPSE_5_TO_3 = np.array([0, 1, 2, 2, 2], dtype=np.int16)


def ontology_for(n_classes: int) -> Ontology:
    if n_classes == 5:
        return ONTOLOGY_5
    if n_classes == 3:
        return ONTOLOGY_3
    raise ConfigError("class count must be 3 or 5")


@dataclass
class MapRecord:
    """One manifest entry; unknown manifest keys survive a round trip."""

    map_id: str
    image_path: str
    label_path: str | None = None
    year: int | None = None
    region: str | None = None
    urban_form: str | None = None
    extras: dict = field(default_factory=dict)

    _KNOWN = ("map_id", "image_path", "label_path", "year", "region", "urban_form")

    @classmethod
    def from_dict(cls, raw: dict) -> "MapRecord":
        if not isinstance(raw, dict):
            raise ManifestError(f"manifest entry is not an object: {raw!r}")
        map_id = raw.get("map_id")
        if not isinstance(map_id, str) or not map_id:
            raise ManifestError("manifest entry lacks a non-empty map_id")
        image_path = raw.get("image_path")
        if not isinstance(image_path, str) or not image_path:
            raise ManifestError(f"{map_id}: manifest entry lacks image_path")
        year = raw.get("year")
        if year is not None:
            if not isinstance(year, int) or isinstance(year, bool):
                raise ManifestError(f"{map_id}: year must be an integer")
            if not YEAR_MIN <= year <= YEAR_MAX:
                raise ManifestError(
                    f"{map_id}: year {year} outside [{YEAR_MIN}, {YEAR_MAX}]"
                )
        region = raw.get("region")
        if region is not None and region not in REGIONS:
            raise ManifestError(f"{map_id}: unknown region {region!r}")
        urban_form = raw.get("urban_form")
        if urban_form is not None and urban_form not in URBAN_FORMS:
            raise ManifestError(f"{map_id}: unknown urban form {urban_form!r}")
        label_path = raw.get("label_path")
        if label_path is not None and not isinstance(label_path, str):
            raise ManifestError(f"{map_id}: label_path must be a string")
        extras = {k: v for k, v in raw.items() if k not in cls._KNOWN}
        return cls(map_id, image_path, label_path, year, region, urban_form, extras)

    def to_dict(self) -> dict:
        out: dict = {"map_id": self.map_id, "image_path": self.image_path}
        for key in ("label_path", "year", "region", "urban_form"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        out.update(self.extras)
        return out


def load_manifest(path) -> list[MapRecord]:
    """Read a manifest: a JSON array of map records with unique ids."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ManifestError(f"manifest {path} must be a JSON array")
    records = [MapRecord.from_dict(entry) for entry in raw]
    seen: set[str] = set()
    for rec in records:
        if rec.map_id in seen:
            raise ManifestError(f"duplicate map_id {rec.map_id!r}")
        seen.add(rec.map_id)
    return records


def save_manifest(records: list[MapRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([rec.to_dict() for rec in records], fh, indent=2)
        fh.write("\n")


def resolve_path(base, rel) -> Path:
    """Resolve a manifest-relative path against the manifest directory."""
    rel = Path(rel)
    return rel if rel.is_absolute() else Path(base) / rel


@dataclass
class ClassMap:
    """Integer class indices per pixel, tied to their ontology."""

    indices: np.ndarray  # H x W int16
    ontology: Ontology

    @property
    def shape(self) -> tuple[int, int]:
        return self.indices.shape  # type: ignore[return-value]


def decode_labels(img: np.ndarray, ontology: Ontology, tolerance: float = 48.0) -> ClassMap:
    """Map label colors to class indices by nearest anchor.

    A pixel farther than `tolerance` (Euclidean RGB) from every anchor
    is a corrupt label.  Anchors are mutually > 2x48 apart, so within
    tolerance the nearest anchor is unique.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ConfigError("expected an H x W x 3 label image")
    flat = img.reshape(-1, 3).astype(np.float64)
    anchors = np.asarray(ontology.anchors, dtype=np.float64)
    d2 = ((flat[:, None, :] - anchors[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d2, axis=1)
    worst = np.sqrt(d2[np.arange(flat.shape[0]), nearest])
    bad = np.flatnonzero(worst > tolerance)
    if bad.size:
        y, x = divmod(int(bad[0]), img.shape[1])
        raise UnknownColorError(
            f"label pixel at ({x}, {y}) = {tuple(img[y, x])} matches no "
            f"{ontology.name} anchor within {tolerance:g}"
        )
    return ClassMap(nearest.astype(np.int16).reshape(img.shape[:2]), ontology)


def encode_labels(class_map: ClassMap) -> np.ndarray:
    """Render a class map back to exact anchor colors."""
    anchors = np.asarray(class_map.ontology.anchors, dtype=np.uint8)
    return anchors[class_map.indices]


def collapse_classes(class_map: ClassMap) -> ClassMap:
    """Fold the 5-way scheme into {frame, road, map-content}."""
    if class_map.ontology.arity != 5:
        raise ConfigError("collapse_classes expects the 5-class scheme")
    return ClassMap(_COLLAPSE_5_TO_3[class_map.indices], ONTOLOGY_3)


def texel_origins(width: int, height: int, size: int, stride: int) -> list[tuple[int, int]]:
    """Top-left corners of the tile grid anchored at (0, 0).

    Tiles that would overrun the right or bottom edge are dropped, so
    the count is floor((W-size)/stride + 1) * floor((H-size)/stride + 1).
    """
    if size < 8:
        raise ConfigError("texel size must be >= 8")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    xs = range(0, width - size + 1, stride)
    ys = range(0, height - size + 1, stride)
    return [(x, y) for y in ys for x in xs]


@dataclass
class Texel:
    """A square tile cut from a map, with its source position."""

    map_id: str
    x: int
    y: int
    size: int
    pixels: np.ndarray  # size x size x 3 uint8 view into the source
    assigned_class: int | None = None


def extract_texels(
    img: np.ndarray, size: int, stride: int, map_id: str = ""
) -> list[Texel]:
    """Cut the tile grid out of one map; pixel arrays are views."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ConfigError("expected an H x W x 3 image")
    h, w = img.shape[:2]
    return [
        Texel(map_id, x, y, size, img[y : y + size, x : x + size])
        for x, y in texel_origins(w, h, size, stride)
    ]


def assign_texel_class(
    class_map: ClassMap, x: int, y: int, size: int, threshold: float = 0.75
) -> int | None:
    """Dominant class of a tile if it covers >= threshold of the pixels."""
    if not 0.0 < threshold <= 1.0:
        raise ConfigError("threshold must be in (0, 1]")
    h, w = class_map.indices.shape
    if x < 0 or y < 0 or x + size > w or y + size > h:
        raise ConfigError("tile window falls outside the label map")
    window = class_map.indices[y : y + size, x : x + size]
    counts = np.bincount(window.ravel(), minlength=class_map.ontology.arity)
    top = int(np.argmax(counts))
    if counts[top] / float(size * size) >= threshold:
        return top
    return None


def area_proportions(class_map: ClassMap) -> np.ndarray:
    """Per-class pixel share; sums to 1 over the ontology's classes."""
    counts = np.bincount(
        class_map.indices.ravel(), minlength=class_map.ontology.arity
    ).astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise ShapeMismatchError("empty class map")
    return counts / total
