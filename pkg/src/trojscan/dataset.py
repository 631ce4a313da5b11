"""Example-image directory layout: class_<n>_example_<m>.png files."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .imaging import ExampleSet, load_png, save_png

EXAMPLE_NAME = re.compile(r"^class_(\d+)_example_(\d+)\.png$")


def example_filename(class_index: int, example_index: int) -> str:
    return f"class_{class_index}_example_{example_index}.png"


def load_examples_dir(path) -> ExampleSet:
    """Load every class_<n>_example_<m>.png under ``path``.

    Classes must be contiguous from 0 and each non-empty; examples are
    ordered by their index.
    """
    root = Path(path)
    if not root.is_dir():
        raise ConfigError(f"examples directory {root} does not exist")
    found: dict[int, list[tuple[int, Path]]] = {}
    for entry in sorted(root.iterdir()):
        m = EXAMPLE_NAME.match(entry.name)
        if m is None:
            continue
        found.setdefault(int(m.group(1)), []).append((int(m.group(2)), entry))
    if not found:
        raise ConfigError(f"no class_<n>_example_<m>.png files under {root}")
    classes = sorted(found)
    if classes != list(range(len(classes))):
        raise ConfigError(
            f"class indices under {root} are not contiguous from 0: {classes}"
        )
    by_class: dict[int, list[np.ndarray]] = {}
    for n in classes:
        by_class[n] = [load_png(p) for _, p in sorted(found[n])]
    return ExampleSet(by_class=by_class)


def save_examples_dir(examples: ExampleSet, path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    for n, imgs in examples.by_class.items():
        for m, img in enumerate(imgs):
            save_png(img, root / example_filename(n, m))
