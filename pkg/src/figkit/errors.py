"""Exception hierarchy shared across the toolkit.

Three branches mirror the CLI exit codes: configuration problems (bad
flags or parameter values, exit 2), input problems (missing or corrupt
files and malformed records, exit 3), and degenerate data (inputs that
are formally valid but carry no usable signal, exit 4).
"""

from __future__ import annotations

__all__ = [
    "FigkitError",
    "ConfigError",
    "TexelTooSmallError",
    "InputError",
    "ManifestError",
    "ShapeMismatchError",
    "UnknownColorError",
    "LayoutMismatchError",
    "InsufficientPointsError",
    "DegenerateDataError",
    "ZeroVarianceError",
    "UnreachableTargetError",
]


class FigkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FigkitError):
    """A parameter value is outside its documented domain."""


class TexelTooSmallError(ConfigError):
    """A tile is too small for the requested neighborhood operator."""


class InputError(FigkitError):
    """An input file or record is missing, unreadable, or malformed."""


class ManifestError(InputError):
    """A corpus manifest entry violates the record contract."""


class ShapeMismatchError(InputError):
    """Two rasters or label maps that must align do not."""


class UnknownColorError(InputError):
    """A label pixel matches no class anchor within tolerance."""


class LayoutMismatchError(InputError):
    """A grid layout does not match the item set it should place."""


class InsufficientPointsError(InputError):
    """Too few distinct support points for a fit."""


class DegenerateDataError(FigkitError):
    """Data is valid in form but statistically unusable."""


class ZeroVarianceError(DegenerateDataError):
    """A sample that must vary is constant."""


class UnreachableTargetError(DegenerateDataError):
    """An extrapolation target lies outside the fitted curve's range."""
