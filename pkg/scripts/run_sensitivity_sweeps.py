#!/usr/bin/env python3
"""Sensitivity sweeps over the scanner's main knobs, on a synthetic benchmark.

    python scripts/run_sensitivity_sweeps.py [--out DIR] [--seed N]

Produces one sweep.csv per parameter (color rounds, trigger-size step,
trigger-area count) for plotting detection quality against query cost.
Exact-color poisoned models make the rounds sweep informative: one random
color per round only sometimes lands inside the trigger's color band.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from trojscan.bench import generate_benchmark
from trojscan.evaluation import load_manifest, sweep, write_sweep_csv
from trojscan.pipeline import ScanConfig

SWEEPS = {
    "max_rounds": [1, 2, 4, 6],
    "size_step": [0.02, 0.04, 0.08],
    "location_count": [1, 2, 3, 4],
}


def make_color_sensitive(bench_root: Path, tolerance: int = 80) -> None:
    """Rewrite the square-poisoned oracles to demand a color band, so extra
    color rounds actually matter."""
    manifest = json.loads((bench_root / "manifest.json").read_text())
    for entry in manifest["models"]:
        if entry["trigger_type"] != "polygon":
            continue
        spec_path = bench_root / entry["oracle"]["spec"]
        spec = json.loads(spec_path.read_text())
        spec["poison"].update(
            {
                "color_robust": False,
                "color": [128, 128, 128],
                "color_tolerance": tolerance,
            }
        )
        spec_path.write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="sweep_out")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--poisoned", type=int, default=8)
    parser.add_argument("--clean", type=int, default=8)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    out = Path(args.out)
    bench = out / "bench"
    generate_benchmark(bench, poisoned=args.poisoned, clean=args.clean, seed=args.seed)
    make_color_sensitive(bench)
    manifest = load_manifest(bench)

    for param, values in SWEEPS.items():
        points = sweep(manifest, ScanConfig(), param, values, jobs=args.jobs)
        path = write_sweep_csv(points, param, out / param)
        print(f"{param}:")
        for value, report in points:
            agg = report.aggregate
            print(
                f"  {param}={value:<5} roc_auc={agg.get('roc_auc', float('nan')):.3f} "
                f"ce={agg.get('ce_loss', float('nan')):.3f} "
                f"queries={agg['queries_total']}"
            )
        print(f"  -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
