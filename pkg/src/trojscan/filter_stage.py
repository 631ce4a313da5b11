"""Stage S2: filter-trigger search over every (class, image, filter) cell.

No randomness here: every example of every class is pushed through each
candidate filter, and confident off-class predictions accumulate in a
per-class counter. Unlike the polygon stage the counter fires on >= (not >)
its maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvalidParameterError, OracleError
from .filters import FilterType, apply_filter, list_filters
from .imaging import ExampleSet
from .oracle import ModelOracle, query
from .polygon_stage import _check_examples, _confidence
from .results import Evidence, StageResult


@dataclass
class FilterConfig:
    threshold: float = 0.99
    max_count: int | None = None  # None: scaled from examples per class
    candidates: list[FilterType] = field(default_factory=list_filters)
    p_high: float = 0.9
    p_low: float = 0.1
    threshold_space: str = "softmax"

    def validate(self) -> "FilterConfig":
        if self.threshold_space not in ("softmax", "raw"):
            raise InvalidParameterError(f"threshold_space {self.threshold_space!r}")
        if self.threshold_space == "softmax" and not (0.0 < self.threshold < 1.0):
            raise InvalidParameterError(f"threshold {self.threshold} outside (0,1)")
        if not self.candidates:
            raise InvalidParameterError("filter candidate list is empty")
        if self.max_count is not None and self.max_count < 1:
            raise InvalidParameterError("max_count must be >= 1")
        if not (0.0 <= self.p_low < self.p_high <= 1.0):
            raise InvalidParameterError(
                f"need 0 <= p_low < p_high <= 1, got {self.p_low}, {self.p_high}"
            )
        return self

    def effective_max_count(self, examples_in_class: int) -> int:
        if self.max_count is not None:
            return self.max_count
        return max(3, math.ceil(0.5 * examples_in_class))

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "max_count": self.max_count,
            "candidates": [f.name.lower() for f in self.candidates],
            "p_high": self.p_high,
            "p_low": self.p_low,
            "threshold_space": self.threshold_space,
        }


def detect_filter(
    oracle: ModelOracle, examples: ExampleSet, config: FilterConfig
) -> StageResult:
    """Run Stage S2 and return its probability verdict with evidence."""
    config.validate()
    _check_examples(examples, oracle.class_count)

    queries_used = 0
    flips_total = 0
    for n in examples.classes():
        counter = 0
        events: list[Evidence] = []
        max_count = config.effective_max_count(len(examples.by_class[n]))
        for ex_idx, img in enumerate(examples.by_class[n]):
            for ftype in config.candidates:
                filtered = apply_filter(img, ftype)
                try:
                    logits = query(oracle, filtered)
                except OracleError as exc:
                    exc.partial = StageResult(
                        stage="filter",
                        probability=config.p_low,
                        triggered=False,
                        evidence=[],
                        queries_used=queries_used,
                        rounds_used=1,
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
                    events.append(Evidence(n, label, ftype, conf, ex_idx))
                if counter >= max_count:
                    return StageResult(
                        stage="filter",
                        probability=config.p_high,
                        triggered=True,
                        evidence=events,
                        queries_used=queries_used,
                        rounds_used=1,
                        flips_total=flips_total,
                    )
    return StageResult(
        stage="filter",
        probability=config.p_low,
        triggered=False,
        evidence=[],
        queries_used=queries_used,
        rounds_used=1,
        flips_total=flips_total,
    )


def stage_query_budget(config: FilterConfig, examples: ExampleSet) -> int:
    """Upper bound: sum over classes of |examples| x |candidates|."""
    return examples.total() * len(config.candidates)
