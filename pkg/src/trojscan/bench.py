"""Materialize a synthetic benchmark: a manifest of clean and poisoned oracles."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import save_examples_dir
from .errors import InvalidParameterError
from .filters import list_filters
from .imaging import ExampleSet, resize_bilinear
from .synthetic import (
    FilterRule,
    SquareRule,
    SyntheticOracleSpec,
    save_spec_json,
)

DEFAULT_DIMS = (64, 64)
DEFAULT_CLASSES = 5
DEFAULT_EXAMPLES_PER_CLASS = 4


def _random_field(rng: np.random.Generator, dims: tuple[int, int]) -> np.ndarray:
    """Smooth random image plus per-pixel noise; no flat squares anywhere."""
    coarse = rng.uniform(0.05, 0.95, size=(8, 8, 3))
    img = resize_bilinear(coarse, dims)
    img = img + rng.uniform(-0.015, 0.015, size=img.shape)
    return np.clip(img, 0.02, 0.98)


def make_example_set(
    rng: np.random.Generator,
    class_count: int = DEFAULT_CLASSES,
    examples_per_class: int = DEFAULT_EXAMPLES_PER_CLASS,
    dims: tuple[int, int] = DEFAULT_DIMS,
) -> ExampleSet:
    by_class = {
        n: [_random_field(rng, dims) for _ in range(examples_per_class)]
        for n in range(class_count)
    }
    return ExampleSet(by_class=by_class)


def generate_benchmark(
    out_dir,
    poisoned: int = 20,
    clean: int = 20,
    seed: int = 7,
    class_count: int = DEFAULT_CLASSES,
    examples_per_class: int = DEFAULT_EXAMPLES_PER_CLASS,
    dims: tuple[int, int] = DEFAULT_DIMS,
) -> Path:
    """Write a manifest of synthetic models: half the poisoned ones carry a
    color-robust square rule, the other half cycle through the filters."""
    if poisoned < 0 or clean < 0 or poisoned + clean == 0:
        raise InvalidParameterError("need a positive number of models")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    filters = list_filters()

    entries = []
    square_count = poisoned // 2
    plan = (
        [("square", i) for i in range(square_count)]
        + [("filter", i) for i in range(poisoned - square_count)]
        + [("clean", i) for i in range(clean)]
    )
    for serial, (kind, _) in enumerate(plan):
        model_id = f"id-{serial:08d}"
        model_dir = root / "models" / model_id
        examples = make_example_set(rng, class_count, examples_per_class, dims)
        save_examples_dir(examples, model_dir / "examples")

        target = int(rng.integers(0, class_count))
        if kind == "square":
            poison = SquareRule(
                target_class=target, min_area_fraction=0.02, color_robust=True
            )
            trigger_type = "polygon"
        elif kind == "filter":
            poison = FilterRule(
                target_class=target,
                filter_type=filters[serial % len(filters)],
            )
            trigger_type = "filter"
        else:
            poison = None
            trigger_type = "none"

        spec = SyntheticOracleSpec(
            class_count=class_count,
            examples=examples,
            input_dims=dims,
            poison=poison,
            descriptor=f"synthetic:{model_id}",
        )
        save_spec_json(spec, model_dir / "oracle.json", examples_dir="examples")
        entries.append(
            {
                "id": model_id,
                "oracle": {"kind": "synthetic", "spec": f"models/{model_id}/oracle.json"},
                "examples_dir": f"models/{model_id}/examples",
                "ground_truth": "clean" if kind == "clean" else "poisoned",
                "trigger_type": trigger_type,
            }
        )

    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps({"models": entries}, indent=2) + "\n")
    return manifest_path
