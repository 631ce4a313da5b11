"""Dataset-of-models evaluation: manifest loading, metrics, sweeps, reports."""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import load_examples_dir
from .errors import ConfigError, MetricError, ScannerError
from .oracle import ModelOracle
from .pipeline import ScanConfig, Verdict, scan_model
from .polygon_stage import grid_for_step
from .remote import ExternalOracle
from .synthetic import load_spec_json, make_synthetic_oracle

GROUND_TRUTHS = ("poisoned", "clean", "unknown")
ORACLE_KINDS = ("exec", "tcp", "synthetic")
TRIGGER_TYPES = ("polygon", "filter", "none", "unknown")
P_CLAMP = 1e-12


@dataclass(frozen=True)
class ManifestEntry:
    model_id: str
    oracle_kind: str
    oracle_spec: str
    examples_dir: str
    ground_truth: str
    trigger_type: str = "unknown"


@dataclass
class Manifest:
    root: Path
    entries: list[ManifestEntry]


def load_manifest(root) -> Manifest:
    """Read and validate <root>/manifest.json."""
    root = Path(root)
    path = root / "manifest.json"
    if not path.is_file():
        raise ConfigError(f"no manifest.json under {root}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest.json is not valid JSON: {exc}") from exc
    models = obj.get("models")
    if not isinstance(models, list) or not models:
        raise ConfigError("manifest field 'models' must be a non-empty list")

    entries = []
    seen = set()
    for i, m in enumerate(models):
        for fld in ("id", "oracle", "examples_dir", "ground_truth"):
            if fld not in m:
                raise ConfigError(f"manifest model #{i} missing field {fld!r}")
        model_id = str(m["id"])
        if model_id in seen:
            raise ConfigError(f"duplicate model id {model_id!r}")
        seen.add(model_id)
        oracle = m["oracle"]
        kind = oracle.get("kind")
        if kind not in ORACLE_KINDS:
            raise ConfigError(f"model {model_id}: oracle kind {kind!r} not in {ORACLE_KINDS}")
        if not oracle.get("spec"):
            raise ConfigError(f"model {model_id}: oracle spec is empty")
        if m["ground_truth"] not in GROUND_TRUTHS:
            raise ConfigError(
                f"model {model_id}: ground_truth {m['ground_truth']!r} not in {GROUND_TRUTHS}"
            )
        trigger_type = m.get("trigger_type", "unknown")
        if trigger_type not in TRIGGER_TYPES:
            raise ConfigError(f"model {model_id}: trigger_type {trigger_type!r}")
        examples_dir = root / m["examples_dir"]
        if not examples_dir.is_dir():
            raise ConfigError(f"model {model_id}: examples dir {examples_dir} missing")
        entries.append(
            ManifestEntry(
                model_id=model_id,
                oracle_kind=kind,
                oracle_spec=str(oracle["spec"]),
                examples_dir=str(m["examples_dir"]),
                ground_truth=m["ground_truth"],
                trigger_type=trigger_type,
            )
        )

    manifest = Manifest(root=root, entries=entries)
    for entry in entries:
        _validate_entry_examples(manifest, entry)
    return manifest


def _validate_entry_examples(manifest: Manifest, entry: ManifestEntry) -> None:
    examples = load_examples_dir(manifest.root / entry.examples_dir)
    if entry.oracle_kind == "synthetic":
        spec_path = manifest.root / entry.oracle_spec
        if not spec_path.is_file():
            raise ConfigError(f"model {entry.model_id}: spec file {spec_path} missing")
        class_count = json.loads(spec_path.read_text()).get("class_count")
        top = max(examples.by_class)
        if class_count is not None and top >= int(class_count):
            raise ConfigError(
                f"model {entry.model_id}: example class {top} out of range for "
                f"{class_count}-class model"
            )


def build_oracle(manifest: Manifest, entry: ManifestEntry, timeout: float = 30.0) -> ModelOracle:
    if entry.oracle_kind == "synthetic":
        return make_synthetic_oracle(load_spec_json(manifest.root / entry.oracle_spec))
    return ExternalOracle(entry.oracle_kind, entry.oracle_spec, timeout=timeout)


def ce_loss(y: int, p: float) -> float:
    """Binary cross-entropy of poison probability p against label y."""
    p = min(max(float(p), P_CLAMP), 1.0 - P_CLAMP)
    if y not in (0, 1):
        raise MetricError(f"label {y!r} is not binary")
    return -(y * np.log(p) + (1 - y) * np.log(1.0 - p))


def mean_ce(labels, probs) -> float:
    losses = [ce_loss(y, p) for y, p in zip(labels, probs, strict=True)]
    if not losses:
        raise MetricError("no rows to average")
    return float(np.mean(losses))


def roc_auc(scores, labels) -> float:
    """Midrank ROC-AUC: P(score+ > score-) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise MetricError("scores and labels must be equal-length vectors")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC-AUC needs both positive and negative labels")

    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def bootstrap_ce_halfwidth(
    losses, n_resamples: int = 1000, seed: int = 0, level: float = 0.95
) -> float:
    """Half-width of the bootstrap CI for the mean CE loss.

    Losses are sorted first so the statistic depends only on the multiset,
    never on row order.
    """
    values = np.sort(np.asarray(losses, dtype=np.float64))
    if values.size == 0:
        raise MetricError("no losses to bootstrap")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(n_resamples, values.size))
    means = values[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [100 * alpha, 100 * (1 - alpha)])
    return float((hi - lo) / 2.0)


@dataclass
class ModelRow:
    model_id: str
    ground_truth: str
    trigger_type: str
    poison_probability: float | None
    decided_by: str | None
    trigger_type_label: str | None
    wall_time: float | None
    total_queries: int | None
    evidence_summary: str | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.model_id,
            "ground_truth": self.ground_truth,
            "trigger_type": self.trigger_type,
            "poison_probability": self.poison_probability,
            "decided_by": self.decided_by,
            "trigger_type_label": self.trigger_type_label,
            "wall_time_s": self.wall_time,
            "total_queries": self.total_queries,
            "evidence_summary": self.evidence_summary,
            "error": self.error,
        }


@dataclass
class Report:
    rows: list[ModelRow]
    aggregate: dict
    config: dict

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "aggregate": self.aggregate,
            "config": self.config,
        }


def derive_seed(base_seed: int, model_id: str) -> int:
    digest = hashlib.sha256(f"{base_seed}:{model_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _summarize(verdict: Verdict) -> str:
    if verdict.decided_by == "none":
        return "no trigger found"
    stage = (
        verdict.polygon_result
        if verdict.decided_by == "polygon"
        else verdict.filter_result
    )
    first = stage.evidence[0]
    target = first.target_class
    return f"{verdict.decided_by} evidence: {len(stage.evidence)} flips toward class {target}"


def _scan_entry(manifest: Manifest, entry: ManifestEntry, config: ScanConfig) -> ModelRow:
    per_model = replace(
        config, polygon=replace(config.polygon, seed=derive_seed(config.polygon.seed, entry.model_id))
    )
    try:
        oracle = build_oracle(manifest, entry)
        try:
            examples = load_examples_dir(manifest.root / entry.examples_dir)
            verdict = scan_model(oracle, examples, per_model)
        finally:
            if hasattr(oracle, "close"):
                oracle.close()
    except ScannerError as exc:
        return ModelRow(
            model_id=entry.model_id,
            ground_truth=entry.ground_truth,
            trigger_type=entry.trigger_type,
            poison_probability=None,
            decided_by=None,
            trigger_type_label=None,
            wall_time=None,
            total_queries=None,
            evidence_summary=None,
            error=str(exc),
        )
    return ModelRow(
        model_id=entry.model_id,
        ground_truth=entry.ground_truth,
        trigger_type=entry.trigger_type,
        poison_probability=verdict.poison_probability,
        decided_by=verdict.decided_by,
        trigger_type_label=verdict.trigger_type_label,
        wall_time=verdict.wall_time,
        total_queries=verdict.total_queries,
        evidence_summary=_summarize(verdict),
    )


def evaluate(manifest: Manifest, config: ScanConfig, jobs: int = 1) -> Report:
    """Scan every manifest model and aggregate metrics over labeled rows.

    Per-model failures become row errors and never abort the batch.
    """
    config.validate()
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if jobs == 1:
        rows = [_scan_entry(manifest, e, config) for e in manifest.entries]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda e: _scan_entry(manifest, e, config), manifest.entries))

    labeled = [
        r
        for r in rows
        if r.error is None and r.ground_truth in ("poisoned", "clean")
    ]
    aggregate: dict = {
        "models_total": len(rows),
        "models_failed": sum(1 for r in rows if r.error is not None),
        "models_scored": len(labeled),
        "runtime_total_s": float(sum(r.wall_time or 0.0 for r in rows)),
        "queries_total": int(sum(r.total_queries or 0 for r in rows)),
    }
    try:
        if not labeled:
            raise MetricError("no scored rows with known ground truth")
        labels = [1 if r.ground_truth == "poisoned" else 0 for r in labeled]
        probs = [r.poison_probability for r in labeled]
        losses = [ce_loss(y, p) for y, p in zip(labels, probs)]
        aggregate["ce_loss"] = float(np.mean(losses))
        aggregate["ce_ci95_halfwidth"] = bootstrap_ce_halfwidth(losses)
        aggregate["roc_auc"] = roc_auc(probs, labels)
    except MetricError as exc:
        aggregate["error"] = str(exc)
    return Report(rows=rows, aggregate=aggregate, config=config.to_dict())


def write_report(report: Report, out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    csv_path = out / "report.csv"
    fields = [
        "id",
        "ground_truth",
        "trigger_type",
        "poison_probability",
        "decided_by",
        "trigger_type_label",
        "wall_time_s",
        "total_queries",
        "evidence_summary",
        "error",
    ]
    with csv_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in report.rows:
            writer.writerow(row.to_dict())
    return json_path, csv_path


SWEEP_PARAMS = ("max_rounds", "size_step", "location_count", "threshold")


def config_for_sweep_point(base: ScanConfig, param: str, value: float) -> ScanConfig:
    if param == "max_rounds":
        return replace(base, polygon=replace(base.polygon, max_rounds=int(value)))
    if param == "size_step":
        return replace(base, polygon=replace(base.polygon, size_grid=grid_for_step(float(value))))
    if param == "location_count":
        return replace(base, polygon=replace(base.polygon, location_count=int(value)))
    if param == "threshold":
        return replace(
            base,
            polygon=replace(base.polygon, threshold=float(value)),
            filter=replace(base.filter, threshold=float(value)),
        )
    raise ConfigError(f"sweep param {param!r} not one of {SWEEP_PARAMS}")


def sweep(
    manifest: Manifest,
    base_config: ScanConfig,
    param: str,
    values: list[float],
    jobs: int = 1,
) -> list[tuple[float, Report]]:
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = []
    for value in values:
        report = evaluate(manifest, config_for_sweep_point(base_config, param, value), jobs=jobs)
        out.append((value, report))
    return out


def write_sweep_csv(points: list[tuple[float, Report]], param: str, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "param",
            "value",
            "roc_auc",
            "ce_loss",
            "runtime_total_s",
            "queries_total",
        ])
        for value, report in points:
            agg = report.aggregate
            writer.writerow(
                [
                    param,
                    value,
                    agg.get("roc_auc", ""),
                    agg.get("ce_loss", ""),
                    agg.get("runtime_total_s", ""),
                    agg.get("queries_total", ""),
                ]
            )
    return path
