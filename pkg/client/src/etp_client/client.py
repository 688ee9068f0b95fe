"""Synchronous remote client for a running tool server.

A client owns one TCP connection.  It is single-threaded by design; open
more clients for parallelism.  Request ids are unique for the lifetime of
the connection, and a reconnect starts a fresh id space.
"""

from __future__ import annotations

import os
import socket
from dataclasses import dataclass
from typing import Any, Iterable

from .wire import FrameError, FrameReader, Response, parse_response, request_frame

DEFAULT_ADDR = "127.0.0.1:8750"
ADDR_ENV_VAR = "ETP_ADDR"

# server error code -> session failure reason
_CODE_TO_REASON = {
    "SCHEMA_VIOLATION": "schema_violation",
    "PRECONDITION_UNSATISFIED": "precondition_unsatisfied",
    "TIMEOUT": "timeout",
    "TOOL_FAULT": "tool_fault",
    "CANCELLED": "cancelled",
    "UNKNOWN_TOOL": "unknown_tool",
}


class ClientError(Exception):
    """Base class for SDK errors."""


class ConnectFailure(ClientError):
    """The server could not be reached or did not answer the ping."""


class ConnectionLost(ClientError):
    """The connection dropped while a request was outstanding."""


class RemoteError(ClientError):
    """The server answered with an error envelope."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class InvokeResult:
    """Outcome of one remote invocation.

    Tool-level failures are values, not exceptions: ``ok`` is False and
    ``code``/``message`` carry the server's error envelope.  ``session``
    holds the full session record for completed calls.
    """

    ok: bool
    session: dict[str, Any] | None = None
    code: str | None = None
    message: str = ""

    @property
    def reason(self) -> str | None:
        """Session failure reason equivalent of the error code."""
        if self.ok or self.code is None:
            return None
        return _CODE_TO_REASON.get(self.code, self.code.lower())


def resolve_addr(address: str | None = None) -> str:
    return address or os.environ.get(ADDR_ENV_VAR) or DEFAULT_ADDR


def _split_addr(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must look like host:port, got {address!r}")
    return host, int(port)


class RemoteToolClient:
    def __init__(self, address: str | None = None, *, timeout: float = 10.0):
        self.address = resolve_addr(address)
        self.timeout = timeout
        self._counter = 0
        self._pending: dict[str, Response] = {}
        self._reader = FrameReader()
        try:
            self._sock = socket.create_connection(_split_addr(self.address), timeout=timeout)
        except OSError as exc:
            raise ConnectFailure(f"cannot connect to {self.address}: {exc}") from exc
        self._sock.settimeout(timeout)

    # -- plumbing ---------------------------------------------------------

    def _next_id(self) -> str:
        self._counter += 1
        return f"c{self._counter:06d}"

    def _send(self, frame: bytes) -> None:
        try:
            self._sock.sendall(frame)
        except OSError as exc:
            raise ConnectionLost(f"send failed: {exc}") from exc

    def _recv_for(self, msg_id: str) -> Response:
        if msg_id in self._pending:
            return self._pending.pop(msg_id)
        while True:
            frame = self._reader.next_frame()
            if frame is None:
                try:
                    data = self._sock.recv(65536)
                except OSError as exc:
                    raise ConnectionLost(f"recv failed: {exc}") from exc
                if not data:
                    raise ConnectionLost("server closed the connection")
                self._reader.feed(data)
                continue
            response = parse_response(frame)
            if response.id == msg_id:
                return response
            self._pending[response.id] = response

    def request(self, method: str, params: dict[str, Any] | None = None) -> Response:
        """One round trip; returns the raw response envelope."""
        msg_id = self._next_id()
        self._send(request_frame(msg_id, method, params or {}))
        return self._recv_for(msg_id)

    def _expect(self, method: str, params: dict[str, Any] | None = None) -> dict[str, Any]:
        response = self.request(method, params)
        if not response.ok:
            raise RemoteError(response.code or "INTERNAL", response.message)
        assert response.result is not None
        return response.result

    # -- protocol methods ---------------------------------------------------

    def ping(self) -> dict[str, Any]:
        return self._expect("ping")

    def list_tools(self) -> dict[str, Any]:
        """Full card listing plus the registry revision."""
        return self._expect("list_tools")

    def discover(
        self,
        *,
        group: str | None = None,
        tags_any: Iterable[str] | None = None,
        tags_all: Iterable[str] | None = None,
        text: str | None = None,
        state: Iterable[str] | None = None,
    ) -> list[dict[str, Any]]:
        """Server-side capability search; error codes surface as RemoteError."""
        params: dict[str, Any] = {}
        if group is not None:
            params["group"] = group
        if tags_any is not None:
            params["tags_any"] = sorted(tags_any)
        if tags_all is not None:
            params["tags_all"] = sorted(tags_all)
        if text is not None:
            params["text"] = text
        if state is not None:
            params["state"] = sorted(state)
        return self._expect("discover", params)["tools"]

    def invoke(
        self,
        tool_id: str,
        arguments: Any,
        *,
        timeout_ms: int | None = None,
        seed: int = 0,
        state: Iterable[str] | None = None,
        session_id: str | None = None,
    ) -> InvokeResult:
        params: dict[str, Any] = {"tool_id": tool_id, "query": arguments, "seed": seed}
        if timeout_ms is not None:
            params["timeout_ms"] = timeout_ms
        if state is not None:
            params["state"] = sorted(state)
        if session_id is not None:
            params["session_id"] = session_id
        response = self.request("invoke", params)
        if response.ok:
            assert response.result is not None
            return InvokeResult(ok=True, session=response.result["session"])
        return InvokeResult(ok=False, code=response.code, message=response.message)

    def invoke_batch(self, calls: Iterable[tuple[str, Any]], *, seed: int = 0) -> list[InvokeResult]:
        """Pipelined invokes; results come back in call order."""
        ids: list[str] = []
        for tool_id, arguments in calls:
            msg_id = self._next_id()
            ids.append(msg_id)
            self._send(request_frame(
                msg_id, "invoke", {"tool_id": tool_id, "query": arguments, "seed": seed}
            ))
        results: list[InvokeResult] = []
        for msg_id in ids:
            response = self._recv_for(msg_id)
            if response.ok:
                assert response.result is not None
                results.append(InvokeResult(ok=True, session=response.result["session"]))
            else:
                results.append(InvokeResult(ok=False, code=response.code,
                                            message=response.message))
        return results

    def session_status(self, session_id: str) -> dict[str, Any]:
        return self._expect("session_status", {"session_id": session_id})["session"]

    def cancel(self, session_id: str) -> bool:
        return bool(self._expect("cancel", {"session_id": session_id})["cancelled"])

    # -- lifecycle ----------------------------------------------------------

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "RemoteToolClient":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


def connect(address: str | None = None, *, timeout: float = 10.0) -> RemoteToolClient:
    """Open a connection and prove it with a ping round trip."""
    client = RemoteToolClient(address, timeout=timeout)
    try:
        pong = client.ping()
    except ClientError as exc:
        client.close()
        raise ConnectFailure(f"ping failed against {client.address}: {exc}") from exc
    if pong != {"pong": True}:
        client.close()
        raise ConnectFailure(f"unexpected ping reply: {pong!r}")
    return client
