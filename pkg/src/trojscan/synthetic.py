"""Synthetic query-only oracles: deterministic stand-ins for trained models.

A synthetic oracle classifies by matching the quantized (8-bit) query
against its stored example set, so its decision function is exact integer
arithmetic: identical across platforms and unaffected by the float32 wire
format. Poison rules fire before the base rule:

- square rule: some axis-aligned block of side >= the rule's minimum exists
  that is uniform (color-robust) or entirely inside the rule's color band;
- filter rule: the query is byte-identical to the stored filtered variant
  of an example under the poisoned filter type.

Filtered variants of every example under all five filters are stored on
every oracle, so filtered queries of clean models route back to their
source class by exact match instead of a lossy nearest-neighbor guess.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import load_examples_dir
from .errors import InvalidParameterError
from .filters import FilterType, apply_filter, list_filters
from .imaging import Color, ExampleSet, resize_bilinear, square_side, to_uint8
from .oracle import check_class_count

FINGERPRINT_BLOCKS = 8


@dataclass(frozen=True)
class SquareRule:
    """Fires on any uniform (or color-band) square of side >= the minimum."""

    target_class: int
    min_area_fraction: float = 0.02
    color_robust: bool = True
    color: Color | None = None
    color_tolerance: int = 0
    region: tuple[tuple[int, int], int] | None = None  # ((row, col), chebyshev radius)

    def __post_init__(self):
        if not (0.0 < self.min_area_fraction < 1.0):
            raise InvalidParameterError(
                f"min_area_fraction {self.min_area_fraction} outside (0,1)"
            )
        if not self.color_robust and self.color is None:
            raise InvalidParameterError("exact-color square rule requires a color")
        if not (0 <= self.color_tolerance <= 255):
            raise InvalidParameterError("color_tolerance outside [0,255]")


@dataclass(frozen=True)
class FilterRule:
    """Fires when the query is the poisoned filter applied to a known example."""

    target_class: int
    filter_type: FilterType


@dataclass(frozen=True)
class Quirk:
    """A single 'natural Trojan' flip: one (class, example, filter) cell."""

    source_class: int
    example_index: int
    filter_type: FilterType
    predicted_class: int


@dataclass
class SyntheticOracleSpec:
    class_count: int
    examples: ExampleSet
    input_dims: tuple[int, int] = (224, 224)
    margin: float = 10.0
    poison: SquareRule | FilterRule | None = None
    quirks: list[Quirk] = field(default_factory=list)
    descriptor: str = "synthetic"

    def __post_init__(self):
        check_class_count(self.class_count)
        if not self.examples.by_class:
            raise InvalidParameterError("synthetic spec needs at least one example")
        for n in self.examples.by_class:
            if not (0 <= n < self.class_count):
                raise InvalidParameterError(
                    f"example class {n} outside [0,{self.class_count})"
                )
        if self.poison is not None and not (
            0 <= self.poison.target_class < self.class_count
        ):
            raise InvalidParameterError("poison target_class outside class range")
        for q in self.quirks:
            if q.predicted_class == q.source_class:
                raise InvalidParameterError("quirk must flip to a different class")


def _window_all_axis1(flags: np.ndarray, length: int) -> np.ndarray:
    """flags[i, j:j+length].all() for every window start, via cumsum."""
    if length <= 1:
        return flags.copy()
    c = np.zeros((flags.shape[0], flags.shape[1] + 1), dtype=np.int64)
    np.cumsum(flags, axis=1, out=c[:, 1:])
    return (c[:, length:] - c[:, :-length]) == length


def _window_all_axis0(flags: np.ndarray, length: int) -> np.ndarray:
    return _window_all_axis1(flags.T, length).T


def find_uniform_square(
    q8: np.ndarray,
    min_side: int,
    color: Color | None = None,
    tolerance: int = 0,
    region: tuple[tuple[int, int], int] | None = None,
) -> bool:
    """Whether an 8-bit image contains a qualifying min_side x min_side block.

    With ``color`` given, every block pixel must lie within ``tolerance`` of
    it per channel; otherwise the block must be exactly one uniform color.
    ``region`` restricts block centers to a Chebyshev ball.
    """
    h, w = q8.shape[:2]
    m = int(min_side)
    if m < 1:
        raise InvalidParameterError(f"min_side {min_side} must be >= 1")
    if m > h or m > w:
        return False

    if color is not None:
        ref = np.array(color.as_tuple(), dtype=np.int16)
        band = (np.abs(q8.astype(np.int16) - ref) <= tolerance).all(axis=2)
        hits = _window_all_axis0(_window_all_axis1(band, m), m)
    else:
        eq_h = (q8[:, 1:] == q8[:, :-1]).all(axis=2)
        eq_v = (q8[1:, :] == q8[:-1, :]).all(axis=2)
        if m == 1:
            hits = np.ones((h, w), dtype=bool)
        else:
            # Each row segment uniform, and the block's left column uniform
            # vertically, forces the whole block onto one color.
            rows_uniform = _window_all_axis1(eq_h, m - 1)
            all_rows = _window_all_axis0(rows_uniform, m)
            left_col = _window_all_axis0(eq_v, m - 1)[:, : w - m + 1]
            hits = all_rows & left_col

    if region is not None:
        (cr, cc), radius = region
        centers_r = np.arange(hits.shape[0]) + (m - 1) / 2.0
        centers_c = np.arange(hits.shape[1]) + (m - 1) / 2.0
        ok_r = np.abs(centers_r - cr) <= radius
        ok_c = np.abs(centers_c - cc) <= radius
        hits = hits & ok_r[:, None] & ok_c[None, :]
    return bool(hits.any())


def pooled_fingerprint(q8: np.ndarray, blocks: int = FINGERPRINT_BLOCKS) -> np.ndarray:
    """Integer block sums used for nearest-neighbor matching."""
    h, w = q8.shape[:2]
    if h % blocks == 0 and w % blocks == 0:
        pooled = q8.reshape(blocks, h // blocks, blocks, w // blocks, 3)
        return pooled.sum(axis=(1, 3), dtype=np.int64).ravel()
    return q8.astype(np.int64).ravel()


class SyntheticOracle:
    """Deterministic, pure oracle over a stored example set (see module doc)."""

    def __init__(self, spec: SyntheticOracleSpec):
        self.spec = spec
        self.class_count = spec.class_count
        self.input_dims = spec.input_dims
        self.descriptor = spec.descriptor
        self._square_rule = spec.poison if isinstance(spec.poison, SquareRule) else None
        self._min_side = None
        if self._square_rule is not None:
            self._min_side = square_side(
                self._square_rule.min_area_fraction, spec.input_dims
            )

        self._base_labels: list[int] = []
        fps = []
        base_images: list[tuple[int, int, np.ndarray]] = []
        for n in sorted(spec.examples.by_class):
            for idx, img in enumerate(spec.examples.by_class[n]):
                prepared = resize_bilinear(img, spec.input_dims)
                base_images.append((n, idx, prepared))
                self._base_labels.append(n)
                fps.append(pooled_fingerprint(to_uint8(prepared)))
        self._base_fps = np.stack(fps)

        quirk_map = {
            (q.source_class, q.example_index, q.filter_type): q.predicted_class
            for q in spec.quirks
        }
        poison_filter = spec.poison.filter_type if isinstance(spec.poison, FilterRule) else None
        self._variant_labels: dict[bytes, int] = {}
        for ftype in list_filters():
            for n, idx, prepared in base_images:
                variant = to_uint8(apply_filter(prepared, ftype))
                if ftype == poison_filter and n != spec.poison.target_class:
                    label = spec.poison.target_class
                elif (n, idx, ftype) in quirk_map:
                    label = quirk_map[(n, idx, ftype)]
                else:
                    label = n
                self._variant_labels[variant.tobytes()] = label

    def _logits_for(self, label: int) -> np.ndarray:
        logits = np.zeros(self.class_count, dtype=np.float64)
        logits[label] = self.spec.margin
        return logits

    def query(self, image: np.ndarray) -> np.ndarray:
        if image.shape[:2] != self.input_dims:
            raise InvalidParameterError(
                f"oracle expects {self.input_dims} input, got {image.shape[:2]}"
            )
        q8 = to_uint8(image)

        rule = self._square_rule
        if rule is not None and find_uniform_square(
            q8,
            self._min_side,
            color=None if rule.color_robust else rule.color,
            tolerance=rule.color_tolerance,
            region=rule.region,
        ):
            return self._logits_for(rule.target_class)

        label = self._variant_labels.get(q8.tobytes())
        if label is not None:
            return self._logits_for(label)

        fp = pooled_fingerprint(q8)
        dists = ((self._base_fps - fp) ** 2).sum(axis=1)
        return self._logits_for(self._base_labels[int(np.argmin(dists))])


def make_synthetic_oracle(spec: SyntheticOracleSpec) -> SyntheticOracle:
    return SyntheticOracle(spec)


def _rule_to_json(poison: SquareRule | FilterRule | None) -> dict | None:
    if poison is None:
        return None
    if isinstance(poison, SquareRule):
        return {
            "kind": "square",
            "target_class": poison.target_class,
            "min_area_fraction": poison.min_area_fraction,
            "color_robust": poison.color_robust,
            "color": list(poison.color.as_tuple()) if poison.color else None,
            "color_tolerance": poison.color_tolerance,
            "region": (
                {"center": list(poison.region[0]), "radius": poison.region[1]}
                if poison.region
                else None
            ),
        }
    return {
        "kind": "filter",
        "target_class": poison.target_class,
        "filter": poison.filter_type.name.lower(),
    }


def _rule_from_json(obj: dict | None) -> SquareRule | FilterRule | None:
    if obj is None:
        return None
    kind = obj.get("kind")
    if kind == "square":
        color = obj.get("color")
        region = obj.get("region")
        return SquareRule(
            target_class=int(obj["target_class"]),
            min_area_fraction=float(obj.get("min_area_fraction", 0.02)),
            color_robust=bool(obj.get("color_robust", True)),
            color=Color(*color) if color else None,
            color_tolerance=int(obj.get("color_tolerance", 0)),
            region=(
                ((int(region["center"][0]), int(region["center"][1])), int(region["radius"]))
                if region
                else None
            ),
        )
    if kind == "filter":
        return FilterRule(
            target_class=int(obj["target_class"]),
            filter_type=FilterType.from_name(obj["filter"]),
        )
    raise InvalidParameterError(f"unknown poison rule kind {kind!r}")


def save_spec_json(spec: SyntheticOracleSpec, path, examples_dir: str) -> None:
    """Write the spec next to an already-materialized examples directory."""
    payload = {
        "class_count": spec.class_count,
        "input_dims": list(spec.input_dims),
        "examples_dir": examples_dir,
        "margin": spec.margin,
        "descriptor": spec.descriptor,
        "poison": _rule_to_json(spec.poison),
        "quirks": [
            {
                "source_class": q.source_class,
                "example_index": q.example_index,
                "filter": q.filter_type.name.lower(),
                "predicted_class": q.predicted_class,
            }
            for q in spec.quirks
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_spec_json(path) -> SyntheticOracleSpec:
    path = Path(path)
    obj = json.loads(path.read_text())
    examples = load_examples_dir((path.parent / obj["examples_dir"]).resolve())
    return SyntheticOracleSpec(
        class_count=int(obj["class_count"]),
        examples=examples,
        input_dims=tuple(int(v) for v in obj.get("input_dims", (224, 224))),
        margin=float(obj.get("margin", 10.0)),
        poison=_rule_from_json(obj.get("poison")),
        quirks=[
            Quirk(
                source_class=int(q["source_class"]),
                example_index=int(q["example_index"]),
                filter_type=FilterType.from_name(q["filter"]),
                predicted_class=int(q["predicted_class"]),
            )
            for q in obj.get("quirks", [])
        ],
        descriptor=str(obj.get("descriptor", f"synthetic:{path.name}")),
    )
