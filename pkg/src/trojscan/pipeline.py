"""Two-stage scan flow: polygon search first, filter search only if it passes."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .errors import InvalidParameterError, OracleError
from .filter_stage import FilterConfig, detect_filter
from .imaging import ExampleSet, resize_bilinear
from .oracle import DEFAULT_INPUT_DIMS, ModelOracle
from .polygon_stage import PolygonConfig, detect_polygon
from .results import StageResult, filter_breakdown, majority_target

STAGE_MODES = ("both", "polygon", "filter")


@dataclass
class ScanConfig:
    polygon: PolygonConfig = field(default_factory=PolygonConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    input_dims: tuple[int, int] = DEFAULT_INPUT_DIMS
    stage: str = "both"
    # accepted oracle class counts; None disables the gate
    class_count_range: tuple[int, int] | None = (5, 25)

    def validate(self) -> "ScanConfig":
        if self.stage not in STAGE_MODES:
            raise InvalidParameterError(
                f"stage {self.stage!r} must be one of {STAGE_MODES}"
            )
        self.polygon.validate()
        self.filter.validate()
        if self.input_dims[0] < 1 or self.input_dims[1] < 1:
            raise InvalidParameterError(f"input_dims {self.input_dims} must be positive")
        if self.class_count_range is not None:
            lo, hi = self.class_count_range
            if not (2 <= lo <= hi):
                raise InvalidParameterError(
                    f"class_count_range {self.class_count_range} is not a valid range"
                )
        return self

    def check_oracle(self, oracle: ModelOracle) -> None:
        if self.class_count_range is None:
            return
        lo, hi = self.class_count_range
        if not (lo <= oracle.class_count <= hi):
            raise InvalidParameterError(
                f"oracle has {oracle.class_count} classes, outside accepted "
                f"range [{lo}, {hi}] (set class_count_range to null to disable)"
            )

    def to_dict(self) -> dict:
        return {
            "polygon": self.polygon.to_dict(),
            "filter": self.filter.to_dict(),
            "input_dims": list(self.input_dims),
            "stage": self.stage,
            "class_count_range": (
                list(self.class_count_range) if self.class_count_range else None
            ),
        }


@dataclass
class Verdict:
    poison_probability: float
    decided_by: str  # polygon | filter | none
    trigger_type_label: str  # polygon-or-filter | filter | none
    polygon_result: StageResult | None
    filter_result: StageResult | None
    model_descriptor: str
    wall_time: float
    total_queries: int

    @property
    def poisoned(self) -> bool:
        return self.decided_by != "none"

    def to_dict(self) -> dict:
        out = {
            "model": self.model_descriptor,
            "poison_probability": self.poison_probability,
            "decided_by": self.decided_by,
            "trigger_type_label": self.trigger_type_label,
            "stages": {
                "polygon": self.polygon_result.to_dict() if self.polygon_result else None,
                "filter": self.filter_result.to_dict() if self.filter_result else None,
            },
            "total_queries": self.total_queries,
            "timing": {"wall_time_s": self.wall_time},
        }
        if self.filter_result is not None and self.filter_result.triggered:
            out["stages"]["filter"]["breakdown"] = filter_breakdown(
                self.filter_result.evidence
            )
            out["stages"]["filter"]["majority_target"] = majority_target(
                self.filter_result.evidence
            )
        return out


def prepare_examples(
    raw: ExampleSet, dims: tuple[int, int], class_count: int | None = None
) -> ExampleSet:
    """Resize every example to the oracle's input size and validate classes."""
    if not raw.by_class:
        raise InvalidParameterError("no examples to prepare")
    by_class = {}
    for n, imgs in raw.by_class.items():
        if class_count is not None and not (0 <= n < class_count):
            raise InvalidParameterError(
                f"example class {n} outside oracle range [0,{class_count})"
            )
        if not imgs:
            raise InvalidParameterError(f"class {n} has no example images")
        by_class[n] = [resize_bilinear(img, dims) for img in imgs]
    return ExampleSet(by_class=by_class)


def scan_model(oracle: ModelOracle, examples: ExampleSet, config: ScanConfig) -> Verdict:
    """Scan one model; polygon stage first, filter stage only if it passes."""
    config.validate()
    config.check_oracle(oracle)
    started = time.perf_counter()
    dims = oracle.input_dims or config.input_dims
    prepared = prepare_examples(examples, dims, oracle.class_count)

    polygon_result: StageResult | None = None
    filter_result: StageResult | None = None

    def build(decided_by: str, probability: float) -> Verdict:
        labels = {"polygon": "polygon-or-filter", "filter": "filter", "none": "none"}
        total = sum(
            r.queries_used for r in (polygon_result, filter_result) if r is not None
        )
        return Verdict(
            poison_probability=probability,
            decided_by=decided_by,
            trigger_type_label=labels[decided_by],
            polygon_result=polygon_result,
            filter_result=filter_result,
            model_descriptor=oracle.descriptor,
            wall_time=time.perf_counter() - started,
            total_queries=total,
        )

    try:
        if config.stage in ("both", "polygon"):
            polygon_result = detect_polygon(oracle, prepared, config.polygon)
            if polygon_result.triggered:
                return build("polygon", polygon_result.probability)
        if config.stage in ("both", "filter"):
            filter_result = detect_filter(oracle, prepared, config.filter)
            if filter_result.triggered:
                return build("filter", filter_result.probability)
    except OracleError as exc:
        stage_partial = getattr(exc, "partial", None)
        if isinstance(stage_partial, StageResult):
            if stage_partial.stage == "polygon":
                polygon_result = stage_partial
            else:
                filter_result = stage_partial
        exc.partial = build("none", config.polygon.p_low)
        raise

    last = filter_result if filter_result is not None else polygon_result
    return build("none", last.probability)
