"""Stage S1: adaptive square-trigger search over random color rounds.

Each round samples one trigger color, builds the location x size candidate
grid, and composites every candidate onto every clean example of every
class. Confident predictions away from the source class increment a
per-class counter; the stage reports its high probability the moment the
counter exceeds the configured maximum, and its low probability after all
rounds pass quietly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError, OracleError
from .imaging import (
    ExampleSet,
    default_size_grid,
    embed_trigger,
    generate_candidates,
    make_square_mask,
    quadrant_centers,
    sample_color,
)
from .oracle import ModelOracle, predict, query
from .results import Evidence, StageResult

MAX_SIZE_FRACTION = 0.25


@dataclass
class PolygonConfig:
    threshold: float = 0.99
    max_count: int = 3
    max_rounds: int = 4
    size_grid: list[float] = field(default_factory=default_size_grid)
    locations: str | list[tuple[int, int]] = "quadrant-centers"
    location_count: int | None = None
    p_high: float = 0.9
    p_low: float = 0.1
    seed: int = 0
    threshold_space: str = "softmax"  # or "raw"

    def validate(self) -> "PolygonConfig":
        if self.threshold_space not in ("softmax", "raw"):
            raise InvalidParameterError(f"threshold_space {self.threshold_space!r}")
        if self.threshold_space == "softmax" and not (0.0 < self.threshold < 1.0):
            raise InvalidParameterError(f"threshold {self.threshold} outside (0,1)")
        if self.max_count < 1 or self.max_rounds < 1:
            raise InvalidParameterError("max_count and max_rounds must be >= 1")
        if not self.size_grid:
            raise InvalidParameterError("size_grid is empty")
        for f in self.size_grid:
            if not (0.0 < f <= MAX_SIZE_FRACTION):
                raise InvalidParameterError(
                    f"size grid entry {f} outside (0, {MAX_SIZE_FRACTION}]"
                )
        if not (0.0 <= self.p_low < self.p_high <= 1.0):
            raise InvalidParameterError(
                f"need 0 <= p_low < p_high <= 1, got {self.p_low}, {self.p_high}"
            )
        return self

    def resolve_locations(self, dims: tuple[int, int]) -> list[tuple[int, int]]:
        if self.locations == "quadrant-centers":
            locs = quadrant_centers(dims)
        elif isinstance(self.locations, str):
            raise InvalidParameterError(f"unknown locations preset {self.locations!r}")
        else:
            locs = [(int(r), int(c)) for r, c in self.locations]
        if self.location_count is not None:
            if not (1 <= self.location_count <= len(locs)):
                raise InvalidParameterError(
                    f"location_count {self.location_count} outside [1, {len(locs)}]"
                )
            locs = locs[: self.location_count]
        return locs

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "max_count": self.max_count,
            "max_rounds": self.max_rounds,
            "size_grid": list(self.size_grid),
            "locations": self.locations if isinstance(self.locations, str)
            else [list(loc) for loc in self.locations],
            "location_count": self.location_count,
            "p_high": self.p_high,
            "p_low": self.p_low,
            "seed": self.seed,
            "threshold_space": self.threshold_space,
        }


def _check_examples(examples: ExampleSet, class_count: int) -> tuple[int, int]:
    if not examples.by_class or examples.total() == 0:
        raise InvalidParameterError("need at least one example image")
    for n in examples.by_class:
        if not (0 <= n < class_count):
            raise InvalidParameterError(
                f"example class {n} outside oracle range [0,{class_count})"
            )
    dims = None
    for imgs in examples.by_class.values():
        for img in imgs:
            if dims is None:
                dims = img.shape[:2]
            elif img.shape[:2] != dims:
                raise InvalidParameterError("examples must share one size; resize first")
    return dims


def _confidence(logits: np.ndarray, space: str) -> tuple[int, float]:
    pred = predict(logits)
    if space == "raw":
        return pred.label, float(np.max(logits))
    return pred.label, pred.confidence


def detect_polygon(
    oracle: ModelOracle, examples: ExampleSet, config: PolygonConfig
) -> StageResult:
    """Run Stage S1 and return its probability verdict with evidence."""
    config.validate()
    dims = _check_examples(examples, oracle.class_count)
    locations = config.resolve_locations(dims)
    rng = np.random.default_rng(config.seed)
    masks: dict[tuple[tuple[int, int], float], np.ndarray] = {}

    queries_used = 0
    flips_total = 0
    for round_idx in range(config.max_rounds):
        color = sample_color(rng)
        candidates = generate_candidates(dims, config.size_grid, locations, color)
        for n in examples.classes():
            counter = 0
            events: list[Evidence] = []
            for cand in candidates:
                key = (cand.center, cand.area_fraction)
                mask = masks.get(key)
                if mask is None:
                    mask = make_square_mask(cand.center, cand.area_fraction, dims)
                    masks[key] = mask
                for ex_idx, img in enumerate(examples.by_class[n]):
                    composited = embed_trigger(img, mask, cand.color, cand.blend_theta)
                    try:
                        logits = query(oracle, composited)
                    except OracleError as exc:
                        exc.partial = StageResult(
                            stage="polygon",
                            probability=config.p_low,
                            triggered=False,
                            evidence=[],
                            queries_used=queries_used,
                            rounds_used=round_idx + 1,
                            flips_total=flips_total,
                        )
                        raise
                    queries_used += 1
                    label, conf = _confidence(logits, config.threshold_space)
                    if conf < config.threshold:
                        continue
                    if label != n:
                        counter += 1
                        flips_total += 1
                        events.append(Evidence(n, label, cand, conf, ex_idx))
                        if counter > config.max_count:
                            return StageResult(
                                stage="polygon",
                                probability=config.p_high,
                                triggered=True,
                                evidence=events,
                                queries_used=queries_used,
                                rounds_used=round_idx + 1,
                                flips_total=flips_total,
                            )
    return StageResult(
        stage="polygon",
        probability=config.p_low,
        triggered=False,
        evidence=[],
        queries_used=queries_used,
        rounds_used=config.max_rounds,
        flips_total=flips_total,
    )


def round_query_budget(config: PolygonConfig, examples: ExampleSet, dims) -> int:
    """Queries one full no-exit round costs: |grid| x total examples."""
    locations = config.resolve_locations(dims)
    return len(locations) * len(config.size_grid) * examples.total()


def with_seed(config: PolygonConfig, seed: int) -> PolygonConfig:
    return replace(config, seed=seed)


def grid_for_step(step: float, max_fraction: float = 0.24) -> list[float]:
    """Size grid {step, 2*step, ...} up to ``max_fraction``."""
    if step <= 0:
        raise InvalidParameterError("step must be positive")
    count = int(math.floor(max_fraction / step + 1e-9))
    if count == 0:
        raise InvalidParameterError(f"step {step} larger than {max_fraction}")
    return [round(step * k, 6) for k in range(1, count + 1)]
