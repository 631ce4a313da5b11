"""Bridge entry point: load one model, then answer queries until EOF."""

from __future__ import annotations

import argparse
import json
import sys

from .models import ModelLoadError, load_model
from .server import serve_stdio, serve_tcp


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oracle-bridge",
        description="Host a serialized classifier behind the JSON-lines query protocol",
    )
    parser.add_argument("--model", required=True, help="path to .npz, .json or .pt model")
    parser.add_argument("--tcp", type=int, metavar="PORT", help="serve on TCP instead of stdio")
    parser.add_argument(
        "--normalize",
        choices=["imagenet", "none"],
        default="none",
        help="input normalization applied bridge-side (engine always sends [0,1] RGB)",
    )
    parser.add_argument("--class-count", type=int, help="override/validate the class count")
    parser.add_argument(
        "--device", default="cpu", help="device hint for torch models (cpu, cuda, ...)"
    )
    args = parser.parse_args(argv)

    try:
        model = load_model(
            args.model,
            normalize=args.normalize,
            class_count=args.class_count,
            device=args.device,
        )
    except ModelLoadError as exc:
        # the engine's handshake sees the failure, then we exit nonzero
        sys.stdout.write(json.dumps({"op": "hello", "error": str(exc)}) + "\n")
        sys.stdout.flush()
        return 1

    if args.tcp is not None:
        serve_tcp(model, args.tcp)
    else:
        serve_stdio(model)
    return 0


if __name__ == "__main__":
    sys.exit(main())
