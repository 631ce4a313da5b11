"""Stage and scan result records."""

from __future__ import annotations

from dataclasses import dataclass, field

from .filters import FilterType
from .imaging import TriggerSpec


@dataclass(frozen=True)
class Evidence:
    """One confident misclassification observed during a stage."""

    source_class: int
    target_class: int
    trigger: TriggerSpec | FilterType
    confidence: float
    example_index: int

    def to_dict(self) -> dict:
        if isinstance(self.trigger, FilterType):
            trigger = {"filter": self.trigger.name.lower()}
        else:
            trigger = self.trigger.to_dict()
        return {
            "source_class": self.source_class,
            "target_class": self.target_class,
            "trigger": trigger,
            "confidence": self.confidence,
            "example_index": self.example_index,
        }


@dataclass
class StageResult:
    """Outcome of one detection stage.

    ``triggered`` iff ``probability`` is the stage's high value; evidence is
    non-empty exactly when triggered. ``flips_total`` counts every confident
    flip seen, including sub-threshold ones on the clean path.
    """

    stage: str
    probability: float
    triggered: bool
    evidence: list[Evidence] = field(default_factory=list)
    queries_used: int = 0
    rounds_used: int = 0
    flips_total: int = 0

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "probability": self.probability,
            "triggered": self.triggered,
            "evidence": [e.to_dict() for e in self.evidence],
            "queries_used": self.queries_used,
            "rounds_used": self.rounds_used,
            "flips_total": self.flips_total,
        }


def filter_breakdown(evidence: list[Evidence]) -> dict[str, int]:
    """Per-filter flip counts from filter-stage evidence."""
    counts: dict[str, int] = {}
    for e in evidence:
        if isinstance(e.trigger, FilterType):
            name = e.trigger.name.lower()
            counts[name] = counts.get(name, 0) + 1
    return counts


def majority_target(evidence: list[Evidence]) -> int | None:
    """Most frequent target class in the evidence, lowest index on ties."""
    counts: dict[int, int] = {}
    for e in evidence:
        counts[e.target_class] = counts.get(e.target_class, 0) + 1
    if not counts:
        return None
    return min(counts, key=lambda t: (-counts[t], t))
