"""trojscan: black-box backdoor scanner for image classifiers."""

from .errors import (
    ConfigError,
    ImageIOError,
    InvalidParameterError,
    MetricError,
    OracleError,
    ScannerError,
)
from .filter_stage import FilterConfig, detect_filter
from .filters import FilterType, apply_filter, list_filters
from .imaging import (
    Color,
    ExampleSet,
    TriggerSpec,
    embed_trigger,
    generate_candidates,
    make_square_mask,
    quadrant_centers,
    resize_bilinear,
    sample_color,
)
from .oracle import CountingOracle, ModelOracle, Prediction, predict, query
from .pipeline import ScanConfig, Verdict, prepare_examples, scan_model
from .polygon_stage import PolygonConfig, detect_polygon
from .remote import ExternalOracle, connect_external_oracle
from .results import Evidence, StageResult
from .synthetic import (
    FilterRule,
    Quirk,
    SquareRule,
    SyntheticOracleSpec,
    make_synthetic_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "Color",
    "ConfigError",
    "CountingOracle",
    "Evidence",
    "ExampleSet",
    "ExternalOracle",
    "FilterConfig",
    "FilterRule",
    "FilterType",
    "ImageIOError",
    "InvalidParameterError",
    "MetricError",
    "ModelOracle",
    "OracleError",
    "PolygonConfig",
    "Prediction",
    "Quirk",
    "ScanConfig",
    "ScannerError",
    "SquareRule",
    "StageResult",
    "SyntheticOracleSpec",
    "TriggerSpec",
    "Verdict",
    "apply_filter",
    "connect_external_oracle",
    "detect_filter",
    "detect_polygon",
    "embed_trigger",
    "generate_candidates",
    "list_filters",
    "make_square_mask",
    "make_synthetic_oracle",
    "predict",
    "prepare_examples",
    "quadrant_centers",
    "query",
    "resize_bilinear",
    "sample_color",
    "scan_model",
]
