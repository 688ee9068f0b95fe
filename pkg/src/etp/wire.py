"""Wire protocol: newline-delimited canonical-JSON frames.

One frame is one canonical JSON document (sorted keys, UTF-8, no
insignificant whitespace) terminated by a single LF. Frames above 16 MiB,
invalid UTF-8, and malformed JSON are all BAD_FRAME. Requests carry an id
that responses echo, so responses may arrive out of order.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from typing import Any

from .canonical import canonical_bytes

__all__ = [
    "MAX_FRAME_BYTES",
    "FrameError",
    "frame_encode",
    "frame_decode",
    "FrameReader",
    "WireMessage",
    "WireResponse",
    "METHODS",
    "ERROR_CODES",
    "WireConnection",
    "DEFAULT_ADDR",
    "ADDR_ENV_VAR",
    "parse_addr",
]

MAX_FRAME_BYTES = 16 * 1024 * 1024

ADDR_ENV_VAR = "ETP_ADDR"
DEFAULT_ADDR = "127.0.0.1:8750"

METHODS = (
    "register",
    "deregister",
    "list_tools",
    "discover",
    "invoke",
    "session_status",
    "cancel",
    "ping",
)

ERROR_CODES = (
    "BAD_FRAME",
    "UNKNOWN_METHOD",
    "BAD_PARAMS",
    "UNKNOWN_TOOL",
    "SCHEMA_VIOLATION",
    "PRECONDITION_UNSATISFIED",
    "TIMEOUT",
    "TOOL_FAULT",
    "CANCELLED",
    "INTERNAL",
)


class FrameError(Exception):
    """A frame that cannot be decoded; always answered with BAD_FRAME."""


def frame_encode(payload: Any) -> bytes:
    """Canonical JSON bytes plus the terminating LF."""
    data = canonical_bytes(payload) + b"\n"
    if len(data) > MAX_FRAME_BYTES:
        raise FrameError(f"frame exceeds {MAX_FRAME_BYTES} bytes")
    return data


def frame_decode(data: bytes) -> Any:
    """Decode one frame (with or without its trailing LF)."""
    if len(data) > MAX_FRAME_BYTES:
        raise FrameError(f"frame exceeds {MAX_FRAME_BYTES} bytes")
    body = data[:-1] if data.endswith(b"\n") else data
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FrameError(f"invalid UTF-8: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FrameError(f"malformed JSON: {exc}") from exc


class FrameReader:
    """Incremental frame splitter over a byte stream.

    feed() buffers incoming bytes; next_frame() yields raw frame bytes or
    raises FrameError for an oversized frame (the oversized data is dropped
    through its terminating LF so the stream stays usable).
    """

    def __init__(self) -> None:
        self._buffer = bytearray()
        self._discarding = False

    def feed(self, data: bytes) -> None:
        self._buffer.extend(data)

    def next_frame(self) -> bytes | None:
        if self._discarding:
            cut = self._buffer.find(b"\n")
            if cut < 0:
                self._buffer.clear()
                return None
            del self._buffer[: cut + 1]
            self._discarding = False
            raise FrameError(f"frame exceeds {MAX_FRAME_BYTES} bytes")
        cut = self._buffer.find(b"\n")
        if cut < 0:
            if len(self._buffer) > MAX_FRAME_BYTES:
                self._buffer.clear()
                self._discarding = True
            return None
        frame = bytes(self._buffer[: cut + 1])
        del self._buffer[: cut + 1]
        if len(frame) > MAX_FRAME_BYTES:
            raise FrameError(f"frame exceeds {MAX_FRAME_BYTES} bytes")
        return frame


@dataclass(frozen=True)
class WireMessage:
    """Request envelope: a non-empty id, a known method, and params.

    ``params`` stays untyped on parse so that a message with a recoverable id
    but non-object params can be answered with BAD_PARAMS instead of
    dropping the whole frame.
    """

    id: str
    method: str
    params: Any = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {"id": self.id, "method": self.method, "params": self.params}

    @staticmethod
    def from_json(obj: Any) -> "WireMessage":
        if not isinstance(obj, dict):
            raise FrameError("message must be a JSON object")
        msg_id = obj.get("id")
        if not isinstance(msg_id, str) or not msg_id:
            raise FrameError("message id must be a non-empty string")
        method = obj.get("method")
        if not isinstance(method, str):
            raise FrameError("message method must be a string")
        extra = set(obj) - {"id", "method", "params"}
        if extra:
            raise FrameError(f"unexpected envelope keys: {sorted(extra)}")
        return WireMessage(id=msg_id, method=method, params=obj.get("params", {}))


@dataclass(frozen=True)
class WireResponse:
    """Response envelope: echoes the id; carries result xor error."""

    id: str
    ok: bool
    result: dict[str, Any] | None = None
    error: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        if self.ok and (self.result is None or self.error is not None):
            raise ValueError("ok responses carry a result and no error")
        if not self.ok and (self.error is None or self.result is not None):
            raise ValueError("error responses carry an error and no result")

    def to_json(self) -> dict[str, Any]:
        if self.ok:
            return {"id": self.id, "ok": True, "result": self.result}
        return {"id": self.id, "ok": False, "error": self.error}

    @staticmethod
    def success(msg_id: str, result: dict[str, Any]) -> "WireResponse":
        return WireResponse(id=msg_id, ok=True, result=result)

    @staticmethod
    def failure(msg_id: str, code: str, message: str) -> "WireResponse":
        if code not in ERROR_CODES:
            code = "INTERNAL"
        return WireResponse(id=msg_id, ok=False, error={"code": code, "message": message})

    @staticmethod
    def from_json(obj: Any) -> "WireResponse":
        if not isinstance(obj, dict) or "id" not in obj or "ok" not in obj:
            raise FrameError("response must carry id and ok")
        if obj["ok"]:
            return WireResponse(id=obj["id"], ok=True, result=obj.get("result"))
        return WireResponse(id=obj["id"], ok=False, error=obj.get("error"))


def parse_addr(addr: str) -> tuple[str, int]:
    """Split a host:port address string."""
    host, sep, port = addr.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must look like host:port, got {addr!r}")
    return host, int(port)


class WireConnection:
    """Small blocking client over one TCP connection.

    Supports pipelining: send() many requests, then recv_for() responses in
    whatever order the server produces them.
    """

    def __init__(self, addr: str, *, connect_timeout: float = 5.0):
        host, port = parse_addr(addr)
        self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        self._sock.settimeout(30.0)
        self._reader = FrameReader()
        self._pending: dict[str, WireResponse] = {}
        self._counter = 0

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "WireConnection":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def next_id(self) -> str:
        self._counter += 1
        return f"c{self._counter:06d}"

    def send(self, message: WireMessage) -> None:
        self._sock.sendall(frame_encode(message.to_json()))

    def send_raw(self, data: bytes) -> None:
        self._sock.sendall(data)

    def _read_one(self) -> WireResponse:
        while True:
            frame = self._reader.next_frame()
            if frame is not None:
                return WireResponse.from_json(frame_decode(frame))
            data = self._sock.recv(65536)
            if not data:
                raise ConnectionError("connection closed by peer")
            self._reader.feed(data)

    def recv_any(self) -> WireResponse:
        if self._pending:
            some_id = next(iter(self._pending))
            return self._pending.pop(some_id)
        return self._read_one()

    def recv_for(self, msg_id: str) -> WireResponse:
        if msg_id in self._pending:
            return self._pending.pop(msg_id)
        while True:
            response = self._read_one()
            if response.id == msg_id:
                return response
            self._pending[response.id] = response

    def request(self, method: str, params: dict[str, Any] | None = None) -> WireResponse:
        message = WireMessage(id=self.next_id(), method=method, params=params or {})
        self.send(message)
        return self.recv_for(message.id)
