"""Image representation, square trigger masks, and trigger embedding.

Images are float64 numpy arrays of shape (H, W, 3), RGB, values in [0, 1].
8-bit conversion happens only at I/O boundaries. Masks are uint8 {0,1}
arrays of shape (H, W). Coordinates are (row, col) pairs throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from .errors import ImageIOError, InvalidParameterError

CHANNELS = 3


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check shape/range invariants and return the array unchanged."""
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != CHANNELS:
        raise InvalidParameterError(f"image must be HxWx3, got {getattr(img, 'shape', None)}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidParameterError("image must have positive height and width")
    if img.dtype != np.float64:
        raise InvalidParameterError(f"image dtype must be float64, got {img.dtype}")
    lo, hi = float(img.min()), float(img.max())
    if lo < 0.0 or hi > 1.0:
        raise InvalidParameterError(f"pixel values outside [0,1]: min={lo}, max={hi}")
    return img


def from_uint8(arr: np.ndarray) -> np.ndarray:
    """8-bit storage -> normalized reals, exactly byte/255."""
    return arr.astype(np.float64) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Normalized reals -> 8-bit, round(v*255) clamped to [0, 255]."""
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def load_png(path) -> np.ndarray:
    """Load an image file as float RGB; alpha, if present, is dropped."""
    try:
        with PILImage.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    return from_uint8(arr)


def save_png(img: np.ndarray, path) -> None:
    validate_image(img)
    try:
        PILImage.fromarray(to_uint8(img), mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write image {path}: {exc}") from exc


@dataclass(frozen=True)
class Color:
    """An 8-bit RGB trigger color."""

    r: int
    g: int
    b: int

    def __post_init__(self):
        for name, v in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not (isinstance(v, (int, np.integer)) and 0 <= v <= 255):
                raise InvalidParameterError(f"color channel {name}={v!r} outside [0,255]")

    def as_unit(self) -> np.ndarray:
        """Channel values as normalized reals."""
        return np.array([self.r, self.g, self.b], dtype=np.float64) / 255.0

    def as_tuple(self) -> tuple[int, int, int]:
        return (int(self.r), int(self.g), int(self.b))


@dataclass(frozen=True)
class TriggerSpec:
    """One square-trigger hypothesis: where, how big, what color."""

    center: tuple[int, int]  # (row, col)
    area_fraction: float
    color: Color
    blend_theta: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.area_fraction < 1.0):
            raise InvalidParameterError(f"area_fraction {self.area_fraction} outside (0,1)")
        if not (0.0 <= self.blend_theta <= 1.0):
            raise InvalidParameterError(f"blend_theta {self.blend_theta} outside [0,1]")

    def to_dict(self) -> dict:
        return {
            "center": [int(self.center[0]), int(self.center[1])],
            "area_fraction": float(self.area_fraction),
            "color": list(self.color.as_tuple()),
            "blend_theta": float(self.blend_theta),
        }


def square_side(area_fraction: float, dims: tuple[int, int]) -> int:
    """Side of the square covering ``area_fraction`` of an HxW image.

    round(sqrt(f*H*W)), half-up, floored at 1 and capped at min(H, W).
    """
    h, w = dims
    side = int(math.floor(math.sqrt(area_fraction * h * w) + 0.5))
    return max(1, min(side, h, w))


def make_square_mask(
    center: tuple[int, int], area_fraction: float, dims: tuple[int, int]
) -> np.ndarray:
    """Binary mask holding one axis-aligned square, clamped inside the image."""
    h, w = dims
    if not (0.0 < area_fraction < 1.0):
        raise InvalidParameterError(f"area_fraction {area_fraction} outside (0,1)")
    row, col = int(center[0]), int(center[1])
    if not (0 <= row < h and 0 <= col < w):
        raise InvalidParameterError(f"center {center} outside image dims {dims}")
    side = square_side(area_fraction, dims)
    r0 = min(max(row - side // 2, 0), h - side)
    c0 = min(max(col - side // 2, 0), w - side)
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[r0 : r0 + side, c0 : c0 + side] = 1
    return mask


def embed_trigger(
    image: np.ndarray, mask: np.ndarray, color: Color, theta: float = 0.0
) -> np.ndarray:
    """Composite a trigger onto a copy of ``image``.

    Where the mask is 1 the pixel becomes color + theta*pixel (clamped to
    [0,1]); everywhere else the original value is kept exactly.
    """
    if mask.shape != image.shape[:2]:
        raise InvalidParameterError(
            f"mask dims {mask.shape} do not match image dims {image.shape[:2]}"
        )
    if not (0.0 <= theta <= 1.0):
        raise InvalidParameterError(f"theta {theta} outside [0,1]")
    out = image.copy()
    sel = mask == 1
    patch = color.as_unit()[np.newaxis, :] + theta * image[sel]
    out[sel] = np.clip(patch, 0.0, 1.0)
    return out


def quadrant_centers(dims: tuple[int, int]) -> list[tuple[int, int]]:
    """Center points of the four equal quadrants of an HxW image."""
    h, w = dims
    return [(h // 4, w // 4), (h // 4, 3 * w // 4), (3 * h // 4, w // 4), (3 * h // 4, 3 * w // 4)]


def default_size_grid() -> list[float]:
    """Area fractions 0.02 through 0.24 in steps of 0.02 (12 sizes)."""
    return [round(0.02 * k, 2) for k in range(1, 13)]


def generate_candidates(
    dims: tuple[int, int],
    size_grid: list[float],
    locations: list[tuple[int, int]],
    color: Color,
) -> list[TriggerSpec]:
    """Cross product of locations x sizes, locations outer, input order kept."""
    if not size_grid:
        raise InvalidParameterError("size_grid is empty")
    if not locations:
        raise InvalidParameterError("locations is empty")
    for f in size_grid:
        if not (0.0 < f < 1.0):
            raise InvalidParameterError(f"size grid entry {f} outside (0,1)")
    h, w = dims
    for loc in locations:
        if not (0 <= loc[0] < h and 0 <= loc[1] < w):
            raise InvalidParameterError(f"location {loc} outside image dims {dims}")
    return [
        TriggerSpec(center=(int(loc[0]), int(loc[1])), area_fraction=float(f), color=color)
        for loc in locations
        for f in size_grid
    ]


def sample_color(rng: np.random.Generator) -> Color:
    """Uniform independent 8-bit channels from a seeded generator."""
    r, g, b = rng.integers(0, 256, size=3)
    return Color(int(r), int(g), int(b))


def resize_bilinear(img: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Bilinear resize to (H, W). Identity sizes return an exact copy."""
    validate_image(img)
    h_out, w_out = int(dims[0]), int(dims[1])
    if h_out < 1 or w_out < 1:
        raise InvalidParameterError(f"target dims {dims} must be positive")
    h_in, w_in = img.shape[:2]
    if (h_in, w_in) == (h_out, w_out):
        return img.copy()

    # Pixel-center sampling: out pixel i maps to (i + 0.5) * scale - 0.5.
    ys = np.clip((np.arange(h_out) + 0.5) * (h_in / h_out) - 0.5, 0.0, h_in - 1.0)
    xs = np.clip((np.arange(w_out) + 0.5) * (w_in / w_out) - 0.5, 0.0, w_in - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h_in - 1)
    x1 = np.minimum(x0 + 1, w_in - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]

    tl = img[y0][:, x0]
    tr = img[y0][:, x1]
    bl = img[y1][:, x0]
    br = img[y1][:, x1]
    # Lerp form keeps constant inputs exactly constant.
    top = tl + fx * (tr - tl)
    bot = bl + fx * (br - bl)
    return top + fy * (bot - top)


@dataclass
class ExampleSet:
    """Per-class clean images, the detector's working set."""

    by_class: dict[int, list[np.ndarray]] = field(default_factory=dict)

    def classes(self) -> list[int]:
        return sorted(self.by_class)

    def total(self) -> int:
        return sum(len(v) for v in self.by_class.values())

    def per_class_counts(self) -> dict[int, int]:
        return {n: len(v) for n, v in sorted(self.by_class.items())}
