"""Client side of the JSON-lines oracle wire protocol.

One connection talks to one hosted model over the stdio of a launched
subprocess or a TCP socket. Messages are single JSON objects per line:

    engine -> bridge   {"op": "hello"}
    bridge -> engine   {"op": "hello", "class_count": T, "model": "name"}
    engine -> bridge   {"id": n, "op": "query", "height": H, "width": W,
                        "pixels_b64": base64 of H*W*3 little-endian float32,
                        RGB, row-major}
    bridge -> engine   {"id": n, "logits": [...]} or {"id": n, "error": "msg"}

Responses are matched to requests by id, so out-of-order replies are fine.
"""

from __future__ import annotations

import base64
import json
import queue
import shlex
import socket
import subprocess
import threading

import numpy as np

from .errors import InvalidParameterError, OracleError

DEFAULT_TIMEOUT = 30.0


def encode_pixels(image: np.ndarray) -> str:
    return base64.b64encode(image.astype("<f4").tobytes()).decode("ascii")


def decode_pixels(b64: str, height: int, width: int) -> np.ndarray:
    raw = base64.b64decode(b64.encode("ascii"), validate=True)
    expected = height * width * 3 * 4
    if len(raw) != expected:
        raise ValueError(f"pixel payload is {len(raw)} bytes, expected {expected}")
    arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return arr.reshape(height, width, 3)


def parse_oracle_locator(locator: str) -> tuple[str, str]:
    """Split an --oracle value into (kind, spec)."""
    for prefix in ("exec", "tcp", "synthetic"):
        if locator.startswith(prefix + ":"):
            spec = locator[len(prefix) + 1 :]
            if not spec:
                raise InvalidParameterError(f"empty {prefix} oracle locator")
            return prefix, spec
    raise InvalidParameterError(
        f"oracle locator {locator!r} must start with exec:, tcp: or synthetic:"
    )


class _LineReader(threading.Thread):
    """Pushes parsed JSON lines from a stream into a queue until EOF."""

    def __init__(self, stream):
        super().__init__(daemon=True)
        self.stream = stream
        self.lines: queue.Queue = queue.Queue()

    def run(self):
        try:
            for line in self.stream:
                line = line.strip()
                if not line:
                    continue
                try:
                    self.lines.put(json.loads(line))
                except json.JSONDecodeError:
                    self.lines.put({"_malformed": line})
        except (OSError, ValueError):
            pass
        finally:
            self.lines.put(None)  # EOF marker


class ExternalOracle:
    """Query handle for a bridge-hosted model."""

    def __init__(
        self,
        kind: str,
        spec: str,
        class_count: int | None = None,
        input_dims: tuple[int, int] | None = None,
        timeout: float = DEFAULT_TIMEOUT,
    ):
        self.timeout = timeout
        self.input_dims = input_dims
        self._next_id = 0
        self._pending: dict[int, dict] = {}
        self._proc = None
        self._sock = None
        self._writer = None

        if kind == "exec":
            self._proc = subprocess.Popen(
                shlex.split(spec),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
            self._writer = self._proc.stdin
            self._reader = _LineReader(self._proc.stdout)
        elif kind == "tcp":
            host, _, port = spec.rpartition(":")
            if not host or not port.isdigit():
                raise InvalidParameterError(f"tcp locator {spec!r} is not HOST:PORT")
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
            self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")
            self._reader = _LineReader(self._sock.makefile("r", encoding="utf-8"))
        else:
            raise InvalidParameterError(f"unsupported external oracle kind {kind!r}")
        self._reader.start()

        hello = self._handshake()
        if "error" in hello:
            self.close()
            raise OracleError(f"bridge failed to load model: {hello['error']}")
        try:
            reported = int(hello["class_count"])
        except (KeyError, TypeError, ValueError):
            self.close()
            raise OracleError(f"malformed hello response: {hello!r}") from None
        if class_count is not None and reported != class_count:
            self.close()
            raise OracleError(
                f"bridge reports {reported} classes, expected {class_count}"
            )
        self.class_count = reported
        self.descriptor = str(hello.get("model", f"{kind}:{spec}"))

    def _send(self, obj: dict) -> None:
        try:
            self._writer.write(json.dumps(obj) + "\n")
            self._writer.flush()
        except (OSError, BrokenPipeError, ValueError) as exc:
            raise OracleError(f"cannot write to oracle endpoint: {exc}") from exc

    def _next_line(self) -> dict:
        try:
            msg = self._reader.lines.get(timeout=self.timeout)
        except queue.Empty:
            raise OracleError(f"oracle endpoint timed out after {self.timeout}s") from None
        if msg is None:
            raise OracleError("oracle endpoint closed the connection")
        if "_malformed" in msg:
            raise OracleError(f"oracle endpoint sent invalid JSON: {msg['_malformed']!r}")
        return msg

    def _handshake(self) -> dict:
        self._send({"op": "hello"})
        while True:
            msg = self._next_line()
            if msg.get("op") == "hello" or "error" in msg:
                return msg

    def _receive_for(self, wanted_id: int) -> dict:
        if wanted_id in self._pending:
            return self._pending.pop(wanted_id)
        while True:
            msg = self._next_line()
            rid = msg.get("id")
            if rid == wanted_id:
                return msg
            if isinstance(rid, int):
                self._pending[rid] = msg

    def _parse_logits(self, msg: dict) -> np.ndarray:
        if "error" in msg:
            raise OracleError(f"oracle error for request {msg.get('id')}: {msg['error']}")
        if "logits" not in msg:
            raise OracleError(f"response missing logits: {msg!r}")
        return np.asarray(msg["logits"], dtype=np.float64)

    def query(self, image: np.ndarray) -> np.ndarray:
        return self.query_many([image])[0]

    def query_many(self, images: list[np.ndarray]) -> list[np.ndarray]:
        """Pipeline several queries on one connection, matching replies by id."""
        ids = []
        for image in images:
            self._next_id += 1
            rid = self._next_id
            ids.append(rid)
            h, w = image.shape[:2]
            self._send(
                {
                    "id": rid,
                    "op": "query",
                    "height": int(h),
                    "width": int(w),
                    "pixels_b64": encode_pixels(image),
                }
            )
        return [self._parse_logits(self._receive_for(rid)) for rid in ids]

    def close(self) -> None:
        for stream in (self._writer,):
            try:
                if stream:
                    stream.close()
            except OSError:
                pass
        if self._proc is not None:
            try:
                self._proc.terminate()
                self._proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
            self._proc = None
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect_external_oracle(
    locator: str,
    class_count: int | None = None,
    input_dims: tuple[int, int] | None = None,
    timeout: float = DEFAULT_TIMEOUT,
) -> ExternalOracle:
    """Open a connection from an exec:/tcp: locator string."""
    kind, spec = parse_oracle_locator(locator)
    if kind == "synthetic":
        raise InvalidParameterError("synthetic oracles are built in-process, not connected")
    return ExternalOracle(
        kind, spec, class_count=class_count, input_dims=input_dims, timeout=timeout
    )
