"""Five fixed Instagram-style filter transforms used as feature-space trigger candidates.

Each filter is a deterministic composition of per-channel tone curves
(piecewise-linear), a 3x3 color-mixing matrix, saturation scaling, and a
radial vignette or center glow. The exact coefficients live in
docs/filters.md; the committed golden images under tests/golden/filters/
are the conformance contract. All arithmetic is float64 on normalized
pixels with a final clamp to [0, 1].
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import InvalidParameterError
from .imaging import validate_image

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722], dtype=np.float64)


class FilterType(enum.IntEnum):
    GOTHAM = 0
    NASHVILLE = 1
    KELVIN = 2
    LOMO = 3
    TOASTER = 4

    @classmethod
    def from_name(cls, name: str) -> "FilterType":
        try:
            return cls[name.upper()]
        except KeyError:
            raise InvalidParameterError(
                f"unknown filter {name!r}; expected one of {[f.name.lower() for f in cls]}"
            ) from None


def list_filters() -> list[FilterType]:
    """All five filters in stable code order."""
    return list(FilterType)


def _curve(values: np.ndarray, points: list[tuple[float, float]]) -> np.ndarray:
    xs = np.array([p[0] for p in points], dtype=np.float64)
    ys = np.array([p[1] for p in points], dtype=np.float64)
    return np.interp(values, xs, ys)


def _mix(img: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    return img @ matrix.T


def _saturation(img: np.ndarray, scale: float) -> np.ndarray:
    luma = img @ LUMA_WEIGHTS
    return luma[:, :, None] + scale * (img - luma[:, :, None])


def _radial_sq(dims: tuple[int, int]) -> np.ndarray:
    """Squared distance from image center, normalized so corners are ~1."""
    h, w = dims
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ys = (np.arange(h) - cy) / max(cy, 0.5)
    xs = (np.arange(w) - cx) / max(cx, 0.5)
    return (ys[:, None] ** 2 + xs[None, :] ** 2) / 2.0


def _vignette(img: np.ndarray, strength: float, floor: float) -> np.ndarray:
    gain = np.maximum(1.0 - strength * _radial_sq(img.shape[:2]), floor)
    return img * gain[:, :, None]


def _center_glow(img: np.ndarray, color: tuple[float, float, float], strength: float) -> np.ndarray:
    glow = strength * (1.0 - _radial_sq(img.shape[:2]))
    return img + glow[:, :, None] * np.array(color, dtype=np.float64)


def _gotham(img: np.ndarray) -> np.ndarray:
    luma = img @ LUMA_WEIGHTS
    luma = _curve(luma, [(0.0, 0.0), (0.25, 0.14), (0.5, 0.5), (0.75, 0.86), (1.0, 1.0)])
    return np.repeat(luma[:, :, None], 3, axis=2)


def _nashville(img: np.ndarray) -> np.ndarray:
    out = np.empty_like(img)
    out[:, :, 0] = _curve(img[:, :, 0], [(0.0, 0.10), (0.5, 0.58), (1.0, 0.92)])
    out[:, :, 1] = _curve(img[:, :, 1], [(0.0, 0.07), (0.5, 0.50), (1.0, 0.88)])
    out[:, :, 2] = _curve(img[:, :, 2], [(0.0, 0.16), (0.5, 0.46), (1.0, 0.80)])
    return _saturation(out, 0.85)


_KELVIN_MATRIX = np.array(
    [
        [1.18, 0.10, 0.00],
        [0.06, 1.02, 0.00],
        [0.00, 0.04, 0.72],
    ],
    dtype=np.float64,
)


def _kelvin(img: np.ndarray) -> np.ndarray:
    out = _saturation(img, 1.45)
    out = _mix(out, _KELVIN_MATRIX)
    out[:, :, 0] = _curve(out[:, :, 0], [(0.0, 0.06), (1.0, 1.0)])
    out[:, :, 2] = _curve(out[:, :, 2], [(0.0, 0.0), (1.0, 0.88)])
    return out


def _lomo(img: np.ndarray) -> np.ndarray:
    out = _curve(img, [(0.0, 0.0), (0.25, 0.16), (0.75, 0.88), (1.0, 1.0)])
    out = _saturation(out, 1.30)
    return _vignette(out, strength=0.55, floor=0.35)


def _toaster(img: np.ndarray) -> np.ndarray:
    out = np.empty_like(img)
    out[:, :, 0] = _curve(img[:, :, 0], [(0.0, 0.06), (1.0, 0.96)])
    out[:, :, 1] = img[:, :, 1]
    out[:, :, 2] = _curve(img[:, :, 2], [(0.0, 0.12), (1.0, 0.82)])
    out = _saturation(out, 0.90)
    out = _center_glow(out, color=(1.0, 0.62, 0.30), strength=0.20)
    return _vignette(out, strength=0.38, floor=0.50)


_TRANSFORMS = {
    FilterType.GOTHAM: _gotham,
    FilterType.NASHVILLE: _nashville,
    FilterType.KELVIN: _kelvin,
    FilterType.LOMO: _lomo,
    FilterType.TOASTER: _toaster,
}


def apply_filter(img: np.ndarray, filter_type: FilterType) -> np.ndarray:
    """Apply one fixed filter; returns a new image, input untouched."""
    validate_image(img)
    if filter_type not in _TRANSFORMS:
        raise InvalidParameterError(f"unknown filter {filter_type!r}")
    return np.clip(_TRANSFORMS[filter_type](img), 0.0, 1.0)
