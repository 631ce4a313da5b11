"""Command-line surface: scan, evaluate, sweep, synth-bench, filters-golden.

Exit codes: 0 success; 1 scan found the model poisoned (scan only);
2 usage error; 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .bench import (
    DEFAULT_CLASSES,
    DEFAULT_DIMS,
    DEFAULT_EXAMPLES_PER_CLASS,
    generate_benchmark,
)
from .dataset import load_examples_dir
from .errors import ScannerError
from .evaluation import (
    SWEEP_PARAMS,
    evaluate,
    load_manifest,
    sweep,
    write_report,
    write_sweep_csv,
)
from .filter_stage import FilterConfig
from .filters import FilterType, apply_filter, list_filters
from .imaging import from_uint8, save_png
from .pipeline import STAGE_MODES, ScanConfig, scan_model
from .polygon_stage import PolygonConfig
from .remote import connect_external_oracle, parse_oracle_locator
from .synthetic import load_spec_json, make_synthetic_oracle

EXIT_OK = 0
EXIT_POISONED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

DEFAULT_DIMS_224 = (224, 224)


def _config_from_file(path: str | None) -> dict:
    if path is None:
        return {}
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict):
        raise ScannerError(f"config file {path} must hold a JSON object")
    return obj


def build_scan_config(args) -> ScanConfig:
    """Config file first, then flags override individual fields."""
    raw = _config_from_file(getattr(args, "config", None))
    poly_raw = dict(raw.get("polygon", {}))
    filt_raw = dict(raw.get("filter", {}))

    polygon = PolygonConfig(
        threshold=poly_raw.get("threshold", 0.99),
        max_count=poly_raw.get("max_count", 3),
        max_rounds=poly_raw.get("max_rounds", 4),
        size_grid=poly_raw.get("size_grid", PolygonConfig().size_grid),
        locations=(
            poly_raw["locations"]
            if isinstance(poly_raw.get("locations"), str)
            else [tuple(loc) for loc in poly_raw["locations"]]
            if "locations" in poly_raw
            else "quadrant-centers"
        ),
        location_count=poly_raw.get("location_count"),
        p_high=poly_raw.get("p_high", 0.9),
        p_low=poly_raw.get("p_low", 0.1),
        seed=poly_raw.get("seed", 0),
        threshold_space=poly_raw.get("threshold_space", "softmax"),
    )
    filter_cfg = FilterConfig(
        threshold=filt_raw.get("threshold", 0.99),
        max_count=filt_raw.get("max_count"),
        candidates=[FilterType.from_name(f) for f in filt_raw["candidates"]]
        if "candidates" in filt_raw
        else list_filters(),
        p_high=filt_raw.get("p_high", 0.9),
        p_low=filt_raw.get("p_low", 0.1),
        threshold_space=filt_raw.get("threshold_space", "softmax"),
    )
    dims_raw = raw.get("input_dims", list(DEFAULT_DIMS_224))
    range_raw = raw.get("class_count_range", [5, 25])
    config = ScanConfig(
        polygon=polygon,
        filter=filter_cfg,
        input_dims=(int(dims_raw[0]), int(dims_raw[1])),
        stage=raw.get("stage", "both"),
        class_count_range=tuple(int(v) for v in range_raw) if range_raw else None,
    )

    if getattr(args, "seed", None) is not None:
        config = replace(config, polygon=replace(config.polygon, seed=args.seed))
    if getattr(args, "stage", None) is not None:
        config = replace(config, stage=args.stage)
    if getattr(args, "dims", None) is not None:
        config = replace(config, input_dims=(args.dims, args.dims))
    return config.validate()


def _open_oracle(locator: str, timeout: float):
    kind, spec = parse_oracle_locator(locator)
    if kind == "synthetic":
        return make_synthetic_oracle(load_spec_json(spec))
    return connect_external_oracle(locator, timeout=timeout)


def cmd_scan(args) -> int:
    config = build_scan_config(args)
    oracle = _open_oracle(args.oracle, args.timeout)
    try:
        examples = load_examples_dir(args.examples)
        verdict = scan_model(oracle, examples, config)
    finally:
        if hasattr(oracle, "close"):
            oracle.close()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = verdict.to_dict()
    payload["config"] = config.to_dict()
    payload["timing"]["created_utc"] = datetime.now(timezone.utc).isoformat()
    (out_dir / "verdict.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    print(
        f"{verdict.model_descriptor}: poison_probability={verdict.poison_probability} "
        f"decided_by={verdict.decided_by} queries={verdict.total_queries}"
    )
    return EXIT_POISONED if verdict.poisoned else EXIT_OK


def cmd_evaluate(args) -> int:
    config = build_scan_config(args)
    manifest = load_manifest(args.root)
    report = evaluate(manifest, config, jobs=args.jobs)
    json_path, csv_path = write_report(report, args.out)
    agg = report.aggregate
    print(
        f"evaluated {agg['models_total']} models: "
        f"roc_auc={agg.get('roc_auc', 'n/a')} ce_loss={agg.get('ce_loss', 'n/a')} "
        f"runtime={agg['runtime_total_s']:.1f}s -> {json_path}, {csv_path}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = build_scan_config(args)
    manifest = load_manifest(args.root)
    values = [float(v) for v in args.values.split(",") if v]
    points = sweep(manifest, config, args.param, values, jobs=args.jobs)
    out = Path(args.out)
    for value, report in points:
        write_report(report, out / f"{args.param}={value:g}")
    path = write_sweep_csv(points, args.param, out)
    print(f"swept {args.param} over {values} -> {path}")
    return EXIT_OK


def cmd_synth_bench(args) -> int:
    manifest_path = generate_benchmark(
        args.out,
        poisoned=args.poisoned,
        clean=args.clean,
        seed=args.seed,
        class_count=args.classes,
        examples_per_class=args.examples_per_class,
        dims=(args.dims, args.dims),
    )
    print(f"benchmark written to {manifest_path}")
    return EXIT_OK


def golden_input(seed: int = 2024, dims: tuple[int, int] = (8, 8)) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return from_uint8(rng.integers(0, 256, size=(*dims, 3), dtype=np.uint8))


def cmd_filters_golden(args) -> int:
    out = Path(args.out)
    existing = sorted(out.glob("*_out.png")) if out.is_dir() else []
    if existing and not args.force:
        print(
            f"golden corpus already exists under {out}; pass --force to regenerate",
            file=sys.stderr,
        )
        return EXIT_RUNTIME
    out.mkdir(parents=True, exist_ok=True)
    img = golden_input()
    for ftype in list_filters():
        name = ftype.name.lower()
        save_png(img, out / f"{name}_in.png")
        save_png(apply_filter(img, ftype), out / f"{name}_out.png")
    print(f"golden corpus written under {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trojscan",
        description="Black-box backdoor scanner for image classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--seed", type=int, help="random seed for trigger colors")
        p.add_argument("--stage", choices=STAGE_MODES, help="stages to run")
        p.add_argument("--dims", type=int, help="square input size for external oracles")

    p_scan = sub.add_parser("scan", help="scan one model and write verdict.json")
    p_scan.add_argument(
        "--oracle", required=True, help="exec:CMD | tcp:HOST:PORT | synthetic:PATH"
    )
    p_scan.add_argument("--examples", required=True, help="clean example directory")
    p_scan.add_argument("--out", default=".", help="output directory")
    p_scan.add_argument("--timeout", type=float, default=30.0)
    add_config_flags(p_scan)
    p_scan.set_defaults(func=cmd_scan)

    p_eval = sub.add_parser("evaluate", help="scan a manifest of models")
    p_eval.add_argument("root", help="directory containing manifest.json")
    p_eval.add_argument("--out", default=".", help="output directory")
    p_eval.add_argument("--jobs", type=int, default=1)
    add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="evaluate across a parameter grid")
    p_sweep.add_argument("root")
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out", default=".", help="output directory")
    p_sweep.add_argument("--jobs", type=int, default=1)
    add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("synth-bench", help="materialize a synthetic benchmark")
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--poisoned", type=int, default=20)
    p_bench.add_argument("--clean", type=int, default=20)
    p_bench.add_argument("--seed", type=int, default=7)
    p_bench.add_argument("--classes", type=int, default=DEFAULT_CLASSES)
    p_bench.add_argument(
        "--examples-per-class", type=int, default=DEFAULT_EXAMPLES_PER_CLASS
    )
    p_bench.add_argument("--dims", type=int, default=DEFAULT_DIMS[0])
    p_bench.set_defaults(func=cmd_synth_bench)

    p_gold = sub.add_parser("filters-golden", help="regenerate the filter golden corpus")
    p_gold.add_argument("--out", default="tests/golden/filters")
    p_gold.add_argument("--force", action="store_true")
    p_gold.set_defaults(func=cmd_filters_golden)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ScannerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
