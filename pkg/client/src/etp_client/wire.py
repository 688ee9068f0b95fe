"""Framing for the newline-delimited JSON tool protocol.

One frame is one canonical-JSON document terminated by a single LF.
Canonical form: object keys sorted, UTF-8, no insignificant whitespace.
Frames above MAX_FRAME_BYTES are a protocol violation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

MAX_FRAME_BYTES = 16 * 1024 * 1024


class FrameError(Exception):
    """A frame could not be produced or understood."""


def canonical_dumps(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def encode_frame(value: Any) -> bytes:
    data = canonical_dumps(value).encode("utf-8") + b"\n"
    if len(data) > MAX_FRAME_BYTES:
        raise FrameError(f"frame exceeds {MAX_FRAME_BYTES} bytes")
    return data


def request_frame(msg_id: str, method: str, params: dict[str, Any]) -> bytes:
    """Build one request frame; ids and methods must be non-empty strings."""
    if not msg_id or not isinstance(msg_id, str):
        raise FrameError("id must be a non-empty string")
    if not method or not isinstance(method, str):
        raise FrameError("method must be a non-empty string")
    return encode_frame({"id": msg_id, "method": method, "params": params})


@dataclass(frozen=True)
class Response:
    """Decoded response envelope."""

    id: str
    ok: bool
    result: dict[str, Any] | None
    error: dict[str, Any] | None

    @property
    def code(self) -> str | None:
        return None if self.error is None else self.error.get("code")

    @property
    def message(self) -> str:
        return "" if self.error is None else str(self.error.get("message", ""))


def parse_response(frame: bytes) -> Response:
    try:
        payload = json.loads(frame.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"malformed response frame: {exc}") from exc
    if not isinstance(payload, dict):
        raise FrameError("response frame is not an object")
    msg_id = payload.get("id")
    ok = payload.get("ok")
    if not isinstance(msg_id, str) or not isinstance(ok, bool):
        raise FrameError("response frame lacks id/ok")
    if ok:
        result = payload.get("result")
        if not isinstance(result, dict):
            raise FrameError("ok response lacks a result object")
        return Response(id=msg_id, ok=True, result=result, error=None)
    error = payload.get("error")
    if not isinstance(error, dict) or "code" not in error:
        raise FrameError("error response lacks an error object")
    return Response(id=msg_id, ok=False, result=None, error=error)


class FrameReader:
    """Accumulates socket bytes and yields complete frames."""

    def __init__(self) -> None:
        self._buffer = bytearray()

    def feed(self, data: bytes) -> None:
        self._buffer.extend(data)
        if len(self._buffer) > MAX_FRAME_BYTES and b"\n" not in self._buffer:
            raise FrameError("peer sent an oversize frame")

    def next_frame(self) -> bytes | None:
        newline = self._buffer.find(b"\n")
        if newline < 0:
            return None
        frame = bytes(self._buffer[: newline + 1])
        del self._buffer[: newline + 1]
        if len(frame) > MAX_FRAME_BYTES:
            raise FrameError("peer sent an oversize frame")
        return frame
