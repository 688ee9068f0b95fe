"""TCP server exposing the registry and execution engine over the wire protocol.

One reader thread per connection; request handling runs on a shared pool so
slow invocations never block other requests, and responses go out in
completion order (out-of-order by design, correlated by id). Registry
mutation methods are disabled unless the server was started with
allow_mutation.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any

from .cards import CardError, Group, card_to_json, parse_card
from .execution import (
    REASON_CANCELLED,
    REASON_PRECONDITION_UNSATISFIED,
    REASON_SCHEMA_VIOLATION,
    REASON_TIMEOUT,
    REASON_TOOL_FAULT,
    REASON_UNKNOWN_TOOL,
    STATUS_COMPLETED,
    ExecutionEngine,
    ExecutionError,
    SessionRecord,
)
from .registry import DiscoveryQuery, Registry
from .wire import (
    FrameError,
    FrameReader,
    METHODS,
    WireMessage,
    WireResponse,
    frame_decode,
    frame_encode,
    parse_addr,
)

__all__ = ["ServerError", "BindFailure", "RegistryLoadFailure", "ToolServer", "serve"]

log = logging.getLogger(__name__)

_REASON_TO_CODE = {
    REASON_SCHEMA_VIOLATION: "SCHEMA_VIOLATION",
    REASON_PRECONDITION_UNSATISFIED: "PRECONDITION_UNSATISFIED",
    REASON_TIMEOUT: "TIMEOUT",
    REASON_TOOL_FAULT: "TOOL_FAULT",
    REASON_CANCELLED: "CANCELLED",
    REASON_UNKNOWN_TOOL: "UNKNOWN_TOOL",
}


class ServerError(Exception):
    """Base class for server lifecycle errors."""


class BindFailure(ServerError):
    """The listen address could not be bound."""


class RegistryLoadFailure(ServerError):
    """The registry file could not be loaded at startup."""


class _Connection:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.write_lock = threading.Lock()
        self.open = True

    def send_response(self, response: WireResponse) -> None:
        data = frame_encode(response.to_json())
        with self.write_lock:
            if not self.open:
                return
            try:
                self.sock.sendall(data)
            except OSError:
                self.open = False

    def close(self) -> None:
        with self.write_lock:
            self.open = False
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self.sock.close()
            except OSError:
                pass


class ToolServer:
    """Protocol server bound to one registry and one execution engine."""

    def __init__(
        self,
        registry: Registry,
        *,
        engine: ExecutionEngine | None = None,
        allow_mutation: bool = False,
        max_workers: int = 32,
    ):
        self.registry = registry
        self.engine = engine or ExecutionEngine(registry.snapshot())
        self.allow_mutation = allow_mutation
        self._pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="etp-req")
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._connections: set[_Connection] = set()
        self._conn_lock = threading.Lock()
        self._closing = threading.Event()
        self._in_flight = 0
        self._in_flight_lock = threading.Lock()
        self.addr: str | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self, addr: str) -> str:
        host, port = parse_addr(addr)
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
        except OSError as exc:
            listener.close()
            raise BindFailure(f"cannot bind {addr}: {exc}") from exc
        listener.listen(128)
        self._listener = listener
        bound_host, bound_port = listener.getsockname()[:2]
        self.addr = f"{bound_host}:{bound_port}"
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        log.info("listening on %s", self.addr)
        return self.addr

    def close(self, drain_timeout: float = 5.0) -> None:
        """Stop accepting, drain in-flight requests up to the timeout, then
        tear down connections."""
        self._closing.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        deadline = time.monotonic() + drain_timeout
        while time.monotonic() < deadline:
            with self._in_flight_lock:
                if self._in_flight == 0:
                    break
            time.sleep(0.01)
        with self._conn_lock:
            connections = list(self._connections)
        for conn in connections:
            conn.close()
        self._pool.shutdown(wait=False)

    def __enter__(self) -> "ToolServer":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    # -- connection handling ---------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._closing.is_set():
            try:
                sock, _peer = self._listener.accept()
            except OSError:
                return
            conn = _Connection(sock)
            with self._conn_lock:
                self._connections.add(conn)
            threading.Thread(target=self._reader_loop, args=(conn,), daemon=True).start()

    def _reader_loop(self, conn: _Connection) -> None:
        reader = FrameReader()
        try:
            while not self._closing.is_set():
                try:
                    data = conn.sock.recv(65536)
                except OSError:
                    return
                if not data:
                    return
                reader.feed(data)
                while True:
                    try:
                        frame = reader.next_frame()
                    except FrameError as exc:
                        conn.send_response(WireResponse.failure("", "BAD_FRAME", str(exc)))
                        continue
                    if frame is None:
                        break
                    self._dispatch_frame(conn, frame)
        finally:
            conn.close()
            with self._conn_lock:
                self._connections.discard(conn)

    def _dispatch_frame(self, conn: _Connection, frame: bytes) -> None:
        try:
            payload = frame_decode(frame)
        except FrameError:
            # Fixed message so bad-frame responses are byte-reproducible.
            conn.send_response(WireResponse.failure("", "BAD_FRAME", "frame is not valid JSON"))
            return
        try:
            message = WireMessage.from_json(payload)
        except FrameError as exc:
            conn.send_response(WireResponse.failure("", "BAD_FRAME", str(exc)))
            return
        with self._in_flight_lock:
            self._in_flight += 1
        self._pool.submit(self._handle_message, conn, message)

    def _handle_message(self, conn: _Connection, message: WireMessage) -> None:
        try:
            response = self._execute_method(message)
        except Exception as exc:  # never let a handler bug kill the reader
            log.exception("handler failure for %s", message.method)
            response = WireResponse.failure(message.id, "INTERNAL", f"{type(exc).__name__}: {exc}")
        finally:
            with self._in_flight_lock:
                self._in_flight -= 1
        conn.send_response(response)

    # -- method implementations ---------------------------------------------------

    def _execute_method(self, message: WireMessage) -> WireResponse:
        if message.method not in METHODS:
            return WireResponse.failure(message.id, "UNKNOWN_METHOD", f"unknown method {message.method!r}")
        if message.method in ("register", "deregister") and not self.allow_mutation:
            return WireResponse.failure(
                message.id,
                "UNKNOWN_METHOD",
                "registry mutation is disabled (start the server with --allow-mutation)",
            )
        if not isinstance(message.params, dict):
            return WireResponse.failure(message.id, "BAD_PARAMS", "params must be an object")
        handler = getattr(self, f"_method_{message.method}")
        return handler(message.id, message.params)

    def _method_ping(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        return WireResponse.success(msg_id, {"pong": True})

    def _method_list_tools(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        snap = self.registry.snapshot()
        return WireResponse.success(
            msg_id,
            {"revision": snap.revision, "tools": [card_to_json(card) for card in snap]},
        )

    def _method_discover(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        try:
            query = _query_from_params(params)
        except ValueError as exc:
            return WireResponse.failure(msg_id, "BAD_PARAMS", str(exc))
        cards = self.registry.discover(query)
        return WireResponse.success(msg_id, {"tools": [card_to_json(card) for card in cards]})

    def _method_invoke(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        tool_id = params.get("tool_id")
        if not isinstance(tool_id, str) or not tool_id:
            return WireResponse.failure(msg_id, "BAD_PARAMS", "tool_id must be a non-empty string")
        if "query" not in params:
            return WireResponse.failure(msg_id, "BAD_PARAMS", "query is required")
        timeout_ms = params.get("timeout_ms")
        if timeout_ms is not None and (isinstance(timeout_ms, bool) or not isinstance(timeout_ms, int) or timeout_ms <= 0):
            return WireResponse.failure(msg_id, "BAD_PARAMS", "timeout_ms must be a positive integer")
        seed = params.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            return WireResponse.failure(msg_id, "BAD_PARAMS", "seed must be an integer")
        state_raw = params.get("state")
        state: frozenset[str] | None = None
        if state_raw is not None:
            if not isinstance(state_raw, list) or not all(isinstance(a, str) for a in state_raw):
                return WireResponse.failure(msg_id, "BAD_PARAMS", "state must be a list of atoms")
            state = frozenset(state_raw)
        session_id = params.get("session_id")
        if session_id is not None and (not isinstance(session_id, str) or not session_id):
            return WireResponse.failure(msg_id, "BAD_PARAMS", "session_id must be a non-empty string")
        extra = set(params) - {"tool_id", "query", "timeout_ms", "seed", "state", "session_id"}
        if extra:
            return WireResponse.failure(msg_id, "BAD_PARAMS", f"unexpected params: {sorted(extra)}")

        try:
            record = self.engine.invoke(
                tool_id,
                params["query"],
                timeout_ms=timeout_ms,
                seed=seed,
                state=state,
                session_id=session_id,
            )
        except ExecutionError as exc:
            return WireResponse.failure(msg_id, "BAD_PARAMS", str(exc))
        return _record_response(msg_id, record)

    def _method_session_status(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        session_id = params.get("session_id")
        if not isinstance(session_id, str) or not session_id:
            return WireResponse.failure(msg_id, "BAD_PARAMS", "session_id must be a non-empty string")
        record = self.engine.get_session(session_id)
        if record is None:
            return WireResponse.failure(msg_id, "BAD_PARAMS", f"unknown session {session_id!r}")
        return WireResponse.success(msg_id, {"session": record.to_json()})

    def _method_cancel(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        session_id = params.get("session_id")
        if not isinstance(session_id, str) or not session_id:
            return WireResponse.failure(msg_id, "BAD_PARAMS", "session_id must be a non-empty string")
        return WireResponse.success(msg_id, {"cancelled": self.engine.cancel(session_id)})

    def _method_register(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        card_raw = params.get("card")
        if card_raw is None:
            return WireResponse.failure(msg_id, "BAD_PARAMS", "card is required")
        try:
            card = parse_card(card_raw)
        except CardError as exc:
            return WireResponse.failure(msg_id, "BAD_PARAMS", f"invalid card: {exc}")
        revision, replaced = self.registry.register(card)
        self.engine.update_snapshot(self.registry.snapshot())
        return WireResponse.success(msg_id, {"revision": revision, "replaced": replaced})

    def _method_deregister(self, msg_id: str, params: dict[str, Any]) -> WireResponse:
        tool_id = params.get("tool_id")
        if not isinstance(tool_id, str) or not tool_id:
            return WireResponse.failure(msg_id, "BAD_PARAMS", "tool_id must be a non-empty string")
        removed = self.registry.deregister(tool_id)
        if removed:
            self.engine.update_snapshot(self.registry.snapshot())
        return WireResponse.success(msg_id, {"removed": removed, "revision": self.registry.revision})


def _query_from_params(params: dict[str, Any]) -> DiscoveryQuery:
    extra = set(params) - {"group", "tags_any", "tags_all", "text", "state"}
    if extra:
        raise ValueError(f"unexpected params: {sorted(extra)}")
    group = None
    if params.get("group") is not None:
        try:
            group = Group(params["group"])
        except ValueError:
            raise ValueError(f"unknown group {params['group']!r}") from None
    def _atom_list(key: str) -> frozenset[str]:
        raw = params.get(key)
        if raw is None:
            return frozenset()
        if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
            raise ValueError(f"{key} must be a list of strings")
        return frozenset(raw)
    text = params.get("text")
    if text is not None and not isinstance(text, str):
        raise ValueError("text must be a string")
    state = None
    if params.get("state") is not None:
        state = _atom_list("state")
    return DiscoveryQuery(
        group=group,
        tags_any=_atom_list("tags_any"),
        tags_all=_atom_list("tags_all"),
        text=text,
        state=state,
    )


def _record_response(msg_id: str, record: SessionRecord) -> WireResponse:
    if record.status == STATUS_COMPLETED:
        return WireResponse.success(msg_id, {"session": record.to_json()})
    code = _REASON_TO_CODE.get(record.reason or "", "INTERNAL")
    detail = record.feedback[-1].detail if record.feedback else (record.reason or "failed")
    return WireResponse.failure(msg_id, code, detail)


def serve(
    addr: str,
    registry: Registry,
    *,
    engine: ExecutionEngine | None = None,
    allow_mutation: bool = False,
) -> ToolServer:
    """Start a server and return its handle; close() tears it down."""
    server = ToolServer(registry, engine=engine, allow_mutation=allow_mutation)
    server.start(addr)
    return server
