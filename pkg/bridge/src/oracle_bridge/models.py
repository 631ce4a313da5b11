"""Model backends the bridge can host.

Three serialized forms are supported:

- ``.npz``: a small average-pool + two-layer MLP in this package's own
  format (arrays w1, b1, w2, b2 plus meta entries).
- ``.json``: a scripted decision-function classifier: nearest stored
  example by pooled 8-bit fingerprint, optionally preceded by a
  uniform-square backdoor rule. All matching is integer arithmetic on
  quantized pixels, so it is exact across platforms and wire formats.
- ``.pt``: a TorchScript module, loaded lazily when torch is installed.

Every backend takes float64 H x W x 3 RGB input in [0, 1] and returns raw
logits (no softmax; thresholding belongs to the scanning engine).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float64)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float64)

EXAMPLE_NAME = re.compile(r"^class_(\d+)_example_(\d+)\.png$")


class ModelLoadError(Exception):
    pass


@dataclass
class HostedModel:
    class_count: int
    input_dims: tuple[int, int]
    descriptor: str
    forward: "callable"


def _normalizer(name: str | None):
    if name in (None, "none"):
        return lambda x: x
    if name == "imagenet":
        return lambda x: (x - IMAGENET_MEAN) / IMAGENET_STD
    raise ModelLoadError(f"unknown normalization {name!r}")


def _block_mean(img: np.ndarray, out_size: int) -> np.ndarray:
    h, w = img.shape[:2]
    if h % out_size or w % out_size:
        raise ValueError(f"input {h}x{w} not divisible into {out_size}x{out_size} blocks")
    return img.reshape(out_size, h // out_size, out_size, w // out_size, 3).mean(axis=(1, 3))


def quantize(img: np.ndarray) -> np.ndarray:
    """round(v * 255) clamped; the integer domain all matching runs in."""
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def block_sum_fingerprint(q8: np.ndarray, blocks: int = 8) -> np.ndarray:
    h, w = q8.shape[:2]
    if h % blocks == 0 and w % blocks == 0:
        view = q8.reshape(blocks, h // blocks, blocks, w // blocks, 3)
        return view.sum(axis=(1, 3), dtype=np.int64).ravel()
    return q8.astype(np.int64).ravel()


def load_npz_model(path: Path, normalize: str | None) -> HostedModel:
    try:
        data = np.load(path, allow_pickle=False)
        w1, b1, w2, b2 = data["w1"], data["b1"], data["w2"], data["b2"]
        pool = int(data["pool"])
        dims = tuple(int(v) for v in data["input_dims"])
    except (OSError, KeyError, ValueError) as exc:
        raise ModelLoadError(f"cannot load npz model {path}: {exc}") from exc
    class_count = int(w2.shape[0])
    norm = _normalizer(normalize)

    def forward(img: np.ndarray) -> np.ndarray:
        x = norm(img)
        z = _block_mean(x, pool).ravel()
        hidden = np.maximum(w1 @ z + b1, 0.0)
        return w2 @ hidden + b2

    return HostedModel(
        class_count=class_count,
        input_dims=dims,
        descriptor=f"npz-mlp:{path.name}",
        forward=forward,
    )


def _load_examples(root: Path) -> list[tuple[int, int, np.ndarray]]:
    from PIL import Image as PILImage

    found = []
    for entry in sorted(root.iterdir()):
        m = EXAMPLE_NAME.match(entry.name)
        if m is None:
            continue
        with PILImage.open(entry) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        found.append((int(m.group(1)), int(m.group(2)), arr))
    if not found:
        raise ModelLoadError(f"no example images under {root}")
    found.sort(key=lambda t: (t[0], t[1]))
    return found


def _largest_uniform_side(q8: np.ndarray, min_side: int) -> bool:
    """Any exactly-uniform min_side x min_side block? Integer window scan."""
    h, w = q8.shape[:2]
    m = min_side
    if m > h or m > w:
        return False
    if m == 1:
        return True

    def window_all(flags, length, axis):
        c = np.cumsum(flags, axis=axis)
        pad_shape = list(flags.shape)
        pad_shape[axis] = 1
        c = np.concatenate([np.zeros(pad_shape, dtype=np.int64), c], axis=axis)
        lead = [slice(None)] * flags.ndim
        trail = [slice(None)] * flags.ndim
        lead[axis] = slice(length, None)
        trail[axis] = slice(None, -length)
        return (c[tuple(lead)] - c[tuple(trail)]) == length

    eq_h = (q8[:, 1:] == q8[:, :-1]).all(axis=2)
    eq_v = (q8[1:, :] == q8[:-1, :]).all(axis=2)
    rows_uniform = window_all(eq_h, m - 1, axis=1)
    all_rows = window_all(rows_uniform, m, axis=0)
    left_col = window_all(eq_v, m - 1, axis=0)[:, : w - m + 1]
    return bool((all_rows & left_col).any())


def load_scripted_model(path: Path, normalize: str | None) -> HostedModel:
    if normalize not in (None, "none"):
        raise ModelLoadError("scripted models match raw [0,1] pixels; use --normalize none")
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelLoadError(f"cannot load scripted model {path}: {exc}") from exc
    if obj.get("kind") != "scripted":
        raise ModelLoadError(f"{path} is not a scripted model file")
    class_count = int(obj["class_count"])
    dims = tuple(int(v) for v in obj["input_dims"])
    margin = float(obj.get("margin", 10.0))
    examples = _load_examples((path.parent / obj["examples_dir"]).resolve())
    labels = [n for n, _, _ in examples]
    fingerprints = np.stack([block_sum_fingerprint(arr) for _, _, arr in examples])

    square = obj.get("square_rule")
    if square is not None:
        target = int(square["target_class"])
        frac = float(square.get("min_area_fraction", 0.02))
        min_side = max(1, int(np.floor(np.sqrt(frac * dims[0] * dims[1]) + 0.5)))
        if not square.get("color_robust", True):
            raise ModelLoadError("scripted models only host color-robust square rules")

    def forward(img: np.ndarray) -> np.ndarray:
        q8 = quantize(img)
        if square is not None and _largest_uniform_side(q8, min_side):
            label = target
        else:
            fp = block_sum_fingerprint(q8)
            dists = ((fingerprints - fp) ** 2).sum(axis=1)
            label = labels[int(np.argmin(dists))]
        logits = np.zeros(class_count, dtype=np.float64)
        logits[label] = margin
        return logits

    return HostedModel(
        class_count=class_count,
        input_dims=dims,
        descriptor=str(obj.get("descriptor", f"scripted:{path.name}")),
        forward=forward,
    )


def load_torch_model(
    path: Path, normalize: str | None, class_count: int | None, device: str = "cpu"
) -> HostedModel:
    try:
        import torch
    except ImportError as exc:
        raise ModelLoadError("torch is not installed; cannot host .pt models") from exc
    try:
        module = torch.jit.load(str(path), map_location=device)
    except (OSError, RuntimeError, ValueError) as exc:
        raise ModelLoadError(f"cannot load torch model {path}: {exc}") from exc
    module.eval()
    norm = _normalizer(normalize)

    def forward(img: np.ndarray) -> np.ndarray:
        x = norm(img)
        chw = np.transpose(x, (2, 0, 1))[np.newaxis].astype(np.float32)
        with torch.no_grad():
            out = module(torch.from_numpy(chw).to(device))
        return out.detach().cpu().numpy().ravel().astype(np.float64)

    if class_count is None:
        probe = forward(np.zeros((224, 224, 3), dtype=np.float64))
        class_count = int(probe.size)
    return HostedModel(
        class_count=class_count,
        input_dims=(224, 224),
        descriptor=f"torchscript:{path.name}",
        forward=forward,
    )


def load_model(
    path,
    normalize: str | None = None,
    class_count: int | None = None,
    device: str = "cpu",
) -> HostedModel:
    path = Path(path)
    if not path.is_file():
        raise ModelLoadError(f"model file {path} does not exist")
    if path.suffix == ".npz":
        model = load_npz_model(path, normalize)
    elif path.suffix == ".json":
        model = load_scripted_model(path, normalize)
    elif path.suffix == ".pt":
        return load_torch_model(path, normalize, class_count, device)
    else:
        raise ModelLoadError(f"unsupported model format {path.suffix!r}")
    if class_count is not None and class_count != model.class_count:
        raise ModelLoadError(
            f"model has {model.class_count} classes, override says {class_count}"
        )
    return model
