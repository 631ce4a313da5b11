"""The black-box boundary: query-only classifier handles and prediction math."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import InvalidParameterError, OracleError

DEFAULT_INPUT_DIMS = (224, 224)
MIN_CLASSES = 5
MAX_CLASSES = 25


@runtime_checkable
class ModelOracle(Protocol):
    """Query-only classifier handle; everything behind it stays opaque."""

    class_count: int
    descriptor: str
    input_dims: tuple[int, int] | None

    def query(self, image: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Prediction:
    label: int
    confidence: float


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    exps = np.exp(shifted)
    return exps / exps.sum()


def predict(logits: np.ndarray) -> Prediction:
    """Softmax confidence and argmax label, ties broken by lowest index."""
    arr = np.asarray(logits, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InvalidParameterError("cannot predict from an empty logits vector")
    probs = softmax(arr)
    label = int(np.argmax(probs))
    return Prediction(label=label, confidence=float(probs[label]))


def query(oracle: ModelOracle, image: np.ndarray) -> np.ndarray:
    """Issue one oracle query and validate the response contract."""
    logits = np.asarray(oracle.query(image), dtype=np.float64).ravel()
    if logits.size != oracle.class_count:
        raise OracleError(
            f"oracle {oracle.descriptor!r} returned {logits.size} logits, "
            f"expected {oracle.class_count}"
        )
    if not np.all(np.isfinite(logits)):
        raise OracleError(f"oracle {oracle.descriptor!r} returned non-finite logits")
    return logits


class CountingOracle:
    """Wrapper that counts and optionally records queries; used for
    instrumentation in tests and query-budget audits."""

    def __init__(self, inner: ModelOracle, record: bool = False):
        self.inner = inner
        self.class_count = inner.class_count
        self.descriptor = f"counting({inner.descriptor})"
        self.input_dims = inner.input_dims
        self.count = 0
        self.record = record
        self.seen: list[np.ndarray] = []

    def query(self, image: np.ndarray) -> np.ndarray:
        self.count += 1
        if self.record:
            self.seen.append(image.copy())
        return self.inner.query(image)


def check_class_count(class_count: int, enforce_range: bool = False) -> int:
    if class_count < 2:
        raise InvalidParameterError(f"class_count {class_count} must be >= 2")
    if enforce_range and not (MIN_CLASSES <= class_count <= MAX_CLASSES):
        raise InvalidParameterError(
            f"class_count {class_count} outside accepted range "
            f"[{MIN_CLASSES}, {MAX_CLASSES}]"
        )
    return class_count
