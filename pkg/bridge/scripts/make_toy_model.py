#!/usr/bin/env python3
"""Regenerate the committed 5-class toy model and its golden logits.

Run from the bridge directory:

    python scripts/make_toy_model.py

Only rerun this when the .npz format itself changes; the golden file pins
the hosted model's behavior.
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from oracle_bridge.models import load_model  # noqa: E402

OUT_DIR = Path(__file__).resolve().parent.parent / "models"
SEED = 2024
POOL = 8
CLASS_COUNT = 5
HIDDEN = 16
INPUT_DIMS = (224, 224)


def main() -> None:
    rng = np.random.default_rng(SEED)
    d_in = POOL * POOL * 3
    w1 = rng.normal(0.0, 0.2, size=(HIDDEN, d_in))
    b1 = rng.normal(0.0, 0.05, size=HIDDEN)
    w2 = rng.normal(0.0, 0.3, size=(CLASS_COUNT, HIDDEN))
    b2 = rng.normal(0.0, 0.05, size=CLASS_COUNT)

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    npz_path = OUT_DIR / "toy5.npz"
    np.savez(
        npz_path,
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        pool=POOL,
        input_dims=np.array(INPUT_DIMS),
    )

    model = load_model(npz_path)
    golden = {
        "input": "all-zero 224x224x3",
        "class_count": model.class_count,
        "logits": [float(v) for v in model.forward(np.zeros((224, 224, 3)))],
    }
    golden_path = OUT_DIR / "toy5_golden.json"
    golden_path.write_text(json.dumps(golden, indent=2) + "\n")
    print(f"wrote {npz_path} and {golden_path}")


if __name__ == "__main__":
    main()
