"""Newline-delimited JSON protocol for remote classifiers, over TCP or stdio."""

from __future__ import annotations

import itertools
import json
import socket
import subprocess
import sys
import threading
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import ProtocolError, TransportError


def encode_message(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode("utf-8") + b"\n"


def decode_message(line: bytes) -> dict:
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed message: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a JSON object")
    return obj


@dataclass
class ServerInfo:
    num_classes: int
    input_shape: Tuple[int, int, int]
    extra: Dict[str, object] = field(default_factory=dict)


class WireClient:
    """Client side of the protocol. One request in flight at a time per client."""

    def __init__(self, reader, writer, *, owned=()):
        self._reader = reader
        self._writer = writer
        self._owned = list(owned)
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self.info: Optional[ServerInfo] = None

    @classmethod
    def connect_tcp(cls, host: str, port: int, timeout: Optional[float] = None) -> "WireClient":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"connect to {host}:{port} failed: {exc}") from exc
        reader = sock.makefile("rb")
        writer = sock.makefile("wb")
        return cls(reader, writer, owned=(reader, writer, sock))

    @classmethod
    def spawn(cls, args: Sequence[str]) -> "WireClient":
        """Launch a server subprocess and talk to it over stdin/stdout."""
        try:
            proc = subprocess.Popen(list(args), stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise TransportError(f"spawn {args[0]!r} failed: {exc}") from exc
        client = cls(proc.stdout, proc.stdin, owned=(proc.stdin, proc.stdout))
        client._proc = proc
        return client

    def close(self) -> None:
        for item in self._owned:
            try:
                item.close()
            except OSError:
                pass
        proc = getattr(self, "_proc", None)
        if proc is not None:
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

    def __enter__(self) -> "WireClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _roundtrip(self, message: dict, request_id: Optional[int]) -> dict:
        payload = encode_message(message)
        try:
            self._writer.write(payload)
            self._writer.flush()
            line = self._reader.readline()
        except (OSError, ValueError) as exc:
            raise TransportError(f"I/O failure: {exc}", request_id=request_id) from exc
        if not line:
            raise TransportError("connection closed by server", request_id=request_id)
        reply = decode_message(line)
        if reply.get("op") == "error":
            raise TransportError(
                f"server error: {reply.get('message', '(no message)')}",
                request_id=reply.get("id", request_id),
            )
        return reply

    def hello(self) -> ServerInfo:
        reply = self._roundtrip({"op": "hello"}, request_id=None)
        if reply.get("op") != "hello":
            raise ProtocolError(f"expected op 'hello', got {reply.get('op')!r}")
        num_classes = reply.get("num_classes")
        shape = reply.get("input_shape")
        if not isinstance(num_classes, int) or num_classes < 1:
            raise ProtocolError(f"bad num_classes: {num_classes!r}")
        if (
            not isinstance(shape, list)
            or len(shape) != 3
            or any(not isinstance(d, int) or d < 1 for d in shape)
        ):
            raise ProtocolError(f"bad input_shape: {shape!r}")
        extra = {k: v for k, v in reply.items() if k not in ("op", "num_classes", "input_shape")}
        self.info = ServerInfo(num_classes, tuple(shape), extra)
        return self.info

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """Submit a (B, C, H, W) batch; returns a (B, num_classes) float array."""
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 4:
            raise ValueError(f"batch must be 4-d (B,C,H,W), got shape {batch.shape}")
        if self.info is None:
            self.hello()
        request_id = next(self._ids)
        with self._lock:
            reply = self._roundtrip(
                {
                    "op": "predict",
                    "id": request_id,
                    "shape": list(batch.shape),
                    "data": batch.ravel().tolist(),
                },
                request_id=request_id,
            )
        if reply.get("op") != "probs":
            raise ProtocolError(f"expected op 'probs', got {reply.get('op')!r}")
        if reply.get("id") != request_id:
            raise ProtocolError(f"id mismatch: sent {request_id}, got {reply.get('id')!r}")
        probs = reply.get("probs")
        if not isinstance(probs, list) or len(probs) != batch.shape[0]:
            raise ProtocolError(f"expected {batch.shape[0]} probability rows")
        n = self.info.num_classes
        for i, row in enumerate(probs):
            if not isinstance(row, list) or len(row) != n:
                raise ProtocolError(f"row {i}: expected {n} probabilities")
        return np.asarray(probs, dtype=np.float64)


def _reply_for(handler, message: dict) -> dict:
    op = message.get("op")
    if op == "hello":
        reply = {
            "op": "hello",
            "num_classes": int(handler.num_classes),
            "input_shape": [int(d) for d in handler.input_shape],
        }
        extra = getattr(handler, "hello_extra", None)
        if callable(extra):
            reply.update(extra())
        return reply
    if op == "predict":
        request_id = message.get("id")
        if not isinstance(request_id, int):
            return {"op": "error", "id": 0, "message": "predict requires an integer id"}
        shape = message.get("shape")
        if (
            not isinstance(shape, list)
            or len(shape) != 4
            or any(not isinstance(d, int) or d < 1 for d in shape)
        ):
            return {"op": "error", "id": request_id, "message": f"bad shape: {shape!r}"}
        if tuple(shape[1:]) != tuple(handler.input_shape):
            return {
                "op": "error",
                "id": request_id,
                "message": f"shape {shape[1:]} does not match input_shape {list(handler.input_shape)}",
            }
        data = message.get("data")
        count = shape[0] * shape[1] * shape[2] * shape[3]
        if not isinstance(data, list) or len(data) != count:
            return {"op": "error", "id": request_id, "message": f"expected {count} data values"}
        try:
            batch = np.asarray(data, dtype=np.float64).reshape(shape)
            probs = np.asarray(handler.predict(batch), dtype=np.float64)
        except Exception as exc:  # handler failures must not kill the connection
            return {"op": "error", "id": request_id, "message": str(exc)}
        return {"op": "probs", "id": request_id, "probs": [row.tolist() for row in probs]}
    return {"op": "error", "id": message.get("id", 0) if isinstance(message.get("id"), int) else 0,
            "message": f"unknown op: {op!r}"}


def handle_stream(handler, reader, writer) -> None:
    """Serve one connection: read requests line by line until EOF."""
    while True:
        try:
            line = reader.readline()
        except (OSError, ValueError):
            return
        if not line:
            return
        if not line.strip():
            continue
        try:
            message = decode_message(line)
        except ProtocolError as exc:
            reply = {"op": "error", "id": 0, "message": str(exc)}
        else:
            reply = _reply_for(handler, message)
        try:
            writer.write(encode_message(reply))
            writer.flush()
        except (OSError, ValueError):
            return


def serve_stdio(handler, stdin=None, stdout=None) -> None:
    """Blocking server over standard streams, for subprocess oracles."""
    reader = stdin if stdin is not None else sys.stdin.buffer
    writer = stdout if stdout is not None else sys.stdout.buffer
    handle_stream(handler, reader, writer)


class WireServer:
    """Threaded TCP server; each connection gets its own handler loop."""

    def __init__(self, handler, host: str = "127.0.0.1", port: int = 0):
        self._handler = handler
        self._host = host
        self._port = port
        self._sock: Optional[socket.socket] = None
        self._threads = []
        self._accept_thread: Optional[threading.Thread] = None
        self.address: Optional[Tuple[str, int]] = None

    def start(self) -> "WireServer":
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self._host, self._port))
        sock.listen()
        self._sock = sock
        self.address = sock.getsockname()[:2]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    def _accept_loop(self) -> None:
        while True:
            try:
                conn, _ = self._sock.accept()
            except OSError:
                return
            thread = threading.Thread(target=self._serve_connection, args=(conn,), daemon=True)
            thread.start()
            self._threads.append(thread)

    def _serve_connection(self, conn: socket.socket) -> None:
        with conn:
            reader = conn.makefile("rb")
            writer = conn.makefile("wb")
            handle_stream(self._handler, reader, writer)

    def stop(self) -> None:
        if self._sock is not None:
            self._sock.close()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)

    def __enter__(self) -> "WireServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


class UniformStubHandler:
    """Reference stub: answers every prediction with the uniform distribution."""

    def __init__(self, num_classes: int, input_shape: Tuple[int, int, int]):
        self.num_classes = int(num_classes)
        self.input_shape = tuple(int(d) for d in input_shape)

    def predict(self, batch: np.ndarray) -> np.ndarray:
        b = batch.shape[0]
        return np.full((b, self.num_classes), 1.0 / self.num_classes, dtype=np.float64)
