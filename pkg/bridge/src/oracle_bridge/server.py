"""JSON-lines request loop for a hosted model, over stdio or TCP.

Protocol (one JSON object per line):

    client -> {"op": "hello"}
    server -> {"op": "hello", "class_count": T, "model": "descriptor"}
    client -> {"id": n, "op": "query", "height": H, "width": W,
               "pixels_b64": base64 of H*W*3 little-endian float32, RGB}
    server -> {"id": n, "logits": [...]} or {"id": n, "error": "msg"}

One request is processed at a time. Malformed requests produce an error
response (with the original id when one was readable) and keep the
connection up. A model that fails to load produces a hello carrying the
error, and the process exits nonzero.
"""

from __future__ import annotations

import base64
import json
import socket

import numpy as np

from .models import HostedModel


def _decode_image(msg: dict) -> np.ndarray:
    height = int(msg["height"])
    width = int(msg["width"])
    if height < 1 or width < 1:
        raise ValueError(f"bad image dims {height}x{width}")
    raw = base64.b64decode(str(msg["pixels_b64"]).encode("ascii"), validate=True)
    expected = height * width * 3 * 4
    if len(raw) != expected:
        raise ValueError(f"pixel payload is {len(raw)} bytes, expected {expected}")
    arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return arr.reshape(height, width, 3)


def handle_line(line: str, model: HostedModel) -> dict | None:
    """One request in, one response out (None for blank lines)."""
    line = line.strip()
    if not line:
        return None
    try:
        msg = json.loads(line)
        if not isinstance(msg, dict):
            raise ValueError("request must be a JSON object")
    except (json.JSONDecodeError, ValueError) as exc:
        return {"error": f"malformed request: {exc}"}

    if msg.get("op") == "hello":
        return {"op": "hello", "class_count": model.class_count, "model": model.descriptor}

    request_id = msg.get("id")
    try:
        if msg.get("op") != "query":
            raise ValueError(f"unknown op {msg.get('op')!r}")
        image = _decode_image(msg)
        logits = np.asarray(model.forward(image), dtype=np.float64).ravel()
        if logits.size != model.class_count:
            raise ValueError(
                f"model returned {logits.size} logits, expected {model.class_count}"
            )
        return {"id": request_id, "logits": [float(v) for v in logits]}
    except Exception as exc:  # noqa: BLE001 - every failure becomes a response
        return {"id": request_id, "error": str(exc)}


def serve_stream(rfile, wfile, model: HostedModel) -> None:
    for line in rfile:
        response = handle_line(line, model)
        if response is None:
            continue
        wfile.write(json.dumps(response) + "\n")
        wfile.flush()


def serve_stdio(model: HostedModel) -> None:
    import sys

    serve_stream(sys.stdin, sys.stdout, model)


def serve_tcp(model: HostedModel, port: int, host: str = "127.0.0.1") -> None:
    """Serve connections one at a time until interrupted."""
    with socket.create_server((host, port)) as server:
        while True:
            conn, _ = server.accept()
            with conn:
                rfile = conn.makefile("r", encoding="utf-8")
                wfile = conn.makefile("w", encoding="utf-8", newline="\n")
                try:
                    serve_stream(rfile, wfile, model)
                except (BrokenPipeError, ConnectionResetError):
                    pass
