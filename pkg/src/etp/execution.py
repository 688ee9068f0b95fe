"""Sessioned tool execution with isolation and runtime feedback.

Every invocation gets its own session record; failures are data, not
exceptions. The engine validates the query against the card's input schema,
optionally checks preconditions against a caller-supplied state, runs the
executor in its own thread with a deadline, and validates the output against
the output schema before marking the session completed.

Timestamps come from an injectable clock and session ids from an injectable
factory so traces can be byte-for-byte deterministic; timeout enforcement
always uses real time.
"""

from __future__ import annotations

import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence

from .canonical import canonical_dumps
from .cards import SchemaNode, preconditions_satisfied, validate_value
from .registry import RegistrySnapshot

__all__ = [
    "ExecutionError",
    "OutputSchemaMismatch",
    "UnknownExecutor",
    "ToolFaultError",
    "FAULT",
    "Clock",
    "RealClock",
    "CountingClock",
    "FeedbackEntry",
    "SessionRecord",
    "InvokeRequest",
    "MockExecutor",
    "ExecutionEngine",
    "STATUS_CREATED",
    "STATUS_VALIDATING",
    "STATUS_RUNNING",
    "STATUS_COMPLETED",
    "STATUS_FAILED",
    "REASON_SCHEMA_VIOLATION",
    "REASON_PRECONDITION_UNSATISFIED",
    "REASON_TIMEOUT",
    "REASON_TOOL_FAULT",
    "REASON_CANCELLED",
    "REASON_UNKNOWN_TOOL",
    "DEFAULT_TIMEOUT_MS",
]


class ExecutionError(Exception):
    """Base class for execution-side configuration errors."""


class OutputSchemaMismatch(ExecutionError):
    """A mock table entry does not validate against the card's output schema."""


class UnknownExecutor(ExecutionError):
    """No executor is registered for the tool."""


class ToolFaultError(Exception):
    """Raised by executors to signal a tool-level fault."""


STATUS_CREATED = "created"
STATUS_VALIDATING = "validating"
STATUS_RUNNING = "running"
STATUS_COMPLETED = "completed"
STATUS_FAILED = "failed"
_TERMINAL = {STATUS_COMPLETED, STATUS_FAILED}

REASON_SCHEMA_VIOLATION = "schema_violation"
REASON_PRECONDITION_UNSATISFIED = "precondition_unsatisfied"
REASON_TIMEOUT = "timeout"
REASON_TOOL_FAULT = "tool_fault"
REASON_CANCELLED = "cancelled"
REASON_UNKNOWN_TOOL = "unknown_tool"

DEFAULT_TIMEOUT_MS = 30_000
_POLL_S = 0.005


class Clock(Protocol):
    def now_ms(self) -> int: ...


class RealClock:
    """Monotonic wall clock in milliseconds."""

    def now_ms(self) -> int:
        return time.monotonic_ns() // 1_000_000


class CountingClock:
    """Deterministic clock: each reading advances by a fixed step."""

    def __init__(self, start: int = 0, step: int = 1):
        self._next = start
        self._step = step
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            value = self._next
            self._next += self._step
            return value


@dataclass(frozen=True)
class FeedbackEntry:
    t_ms: int
    event: str
    detail: str

    def to_json(self, stable: bool = False) -> dict[str, Any]:
        if stable:
            return {"event": self.event, "detail": self.detail}
        return {"t_ms": self.t_ms, "event": self.event, "detail": self.detail}


@dataclass
class SessionRecord:
    """One invocation's lifecycle, feedback, and result."""

    session_id: str
    tool_id: str
    query: Any
    status: str = STATUS_CREATED
    reason: str | None = None
    output: Any = None
    feedback: list[FeedbackEntry] = field(default_factory=list)
    started_at: int = 0
    ended_at: int = 0

    @property
    def duration_ms(self) -> int:
        return self.ended_at - self.started_at

    @property
    def terminal(self) -> bool:
        return self.status in _TERMINAL

    def to_json(self, stable: bool = False) -> dict[str, Any]:
        """Canonical dict form. ``stable=True`` drops the volatile fields
        (session id and timing) for cross-run comparison."""
        out: dict[str, Any] = {
            "tool_id": self.tool_id,
            "query": self.query,
            "status": self.status,
            "reason": self.reason,
            "output": self.output,
            "feedback": [f.to_json(stable=stable) for f in self.feedback],
        }
        if not stable:
            out["session_id"] = self.session_id
            out["started_at"] = self.started_at
            out["ended_at"] = self.ended_at
            out["duration_ms"] = self.duration_ms
        return out


@dataclass(frozen=True)
class InvokeRequest:
    tool_id: str
    query: Any
    timeout_ms: int | None = None
    seed: int = 0
    state: frozenset[str] | None = None


FAULT = object()  # sentinel: mock default raises a tool fault


class MockExecutor:
    """Table-driven executor keyed by the canonical serialization of the query."""

    def __init__(self, table: Mapping[Any, Any], default: Any = FAULT):
        self.table = {self._key(k): v for k, v in table.items()}
        self.default = default

    @staticmethod
    def _key(query: Any) -> str:
        return query if isinstance(query, str) else canonical_dumps(query)

    def outputs(self) -> list[Any]:
        out = list(self.table.values())
        if self.default is not FAULT:
            out.append(self.default)
        return out

    def __call__(self, query: Any, seed: int, deadline_ms: int) -> Any:
        key = canonical_dumps(query)
        if key in self.table:
            return self.table[key]
        if self.default is FAULT:
            raise ToolFaultError(f"no fixture output for query {key}")
        return self.default


Executor = Callable[[Any, int, int], Any]


class _Session:
    def __init__(self, record: SessionRecord):
        self.record = record
        self.lock = threading.Lock()
        self.cancel_event = threading.Event()


class ExecutionEngine:
    """Executes tools from one registry snapshot with per-call isolation."""

    def __init__(
        self,
        snapshot: RegistrySnapshot,
        *,
        default_timeout_ms: int = DEFAULT_TIMEOUT_MS,
        clock: Clock | None = None,
        session_id_factory: Callable[[], str] | None = None,
        image_root: str | Path | None = None,
    ):
        self.snapshot = snapshot
        self.default_timeout_ms = default_timeout_ms
        self.clock = clock or RealClock()
        self._session_id_factory = session_id_factory or (lambda: uuid.uuid4().hex)
        self.image_root = Path(image_root) if image_root is not None else None
        self._executors: dict[str, Executor] = {}
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def update_snapshot(self, snapshot: RegistrySnapshot) -> None:
        """Swap in a newer registry view; existing executors stay wired."""
        self.snapshot = snapshot

    # -- executor wiring ---------------------------------------------------

    def register_executor(self, tool_id: str, executor: Executor) -> None:
        if tool_id not in self.snapshot:
            raise ExecutionError(f"cannot register executor for unknown tool {tool_id!r}")
        self._executors[tool_id] = executor

    def register_mock_executor(
        self, tool_id: str, table: Mapping[Any, Any], default: Any = FAULT
    ) -> MockExecutor:
        """Register a table-driven mock; every output (and a non-fault
        default) must validate against the card's output schema now."""
        card = self.snapshot.get(tool_id)
        if card is None:
            raise ExecutionError(f"cannot register mock for unknown tool {tool_id!r}")
        mock = MockExecutor(table, default)
        for output in mock.outputs():
            report = validate_value(output, card.output_schema)
            if not report.ok:
                first = report.violations[0]
                raise OutputSchemaMismatch(
                    f"mock output for {tool_id} invalid at {first.path or '/'}: {first.message}"
                )
        self._executors[tool_id] = mock
        return mock

    # -- session bookkeeping ------------------------------------------------

    def _new_session(self, tool_id: str, query: Any, session_id: str | None) -> _Session:
        record = SessionRecord(
            session_id=session_id or self._session_id_factory(),
            tool_id=tool_id,
            query=query,
            started_at=self.clock.now_ms(),
        )
        session = _Session(record)
        with self._lock:
            if record.session_id in self._sessions:
                raise ExecutionError(f"session id already in use: {record.session_id!r}")
            self._sessions[record.session_id] = session
        return session

    def get_session(self, session_id: str) -> SessionRecord | None:
        with self._lock:
            session = self._sessions.get(session_id)
        return session.record if session else None

    def cancel(self, session_id: str) -> bool:
        """Cancel a non-terminal session. Returns whether a
        transition to Failed(cancelled) actually happened."""
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            return False
        with session.lock:
            if session.record.terminal:
                return False
            session.cancel_event.set()
            self._finish(session, STATUS_FAILED, REASON_CANCELLED, "cancel", "cancelled by caller")
            return True

    def _feedback(self, session: _Session, event: str, detail: str) -> None:
        session.record.feedback.append(FeedbackEntry(self.clock.now_ms(), event, detail))

    def _finish(
        self, session: _Session, status: str, reason: str | None, event: str, detail: str
    ) -> SessionRecord:
        # Caller holds session.lock.
        record = session.record
        record.status = status
        record.reason = reason
        record.ended_at = max(self.clock.now_ms(), record.started_at)
        record.feedback.append(FeedbackEntry(record.ended_at, event, detail))
        return record

    # -- invocation ----------------------------------------------------------

    def invoke(
        self,
        tool_id: str,
        query: Any,
        *,
        timeout_ms: int | None = None,
        seed: int = 0,
        state: frozenset[str] | set[str] | None = None,
        session_id: str | None = None,
    ) -> SessionRecord:
        """Run one invocation to a terminal session record.

        When ``state`` is omitted the precondition check is skipped (the
        caller owns no state). Every failure comes back as a Failed record
        with one of the fixed reasons. A caller-chosen session_id must be
        unique for the engine's lifetime.
        """
        session = self._new_session(tool_id, query, session_id)
        record = session.record
        timeout = self.default_timeout_ms if timeout_ms is None else timeout_ms
        self._feedback(session, "created", f"session for {tool_id}")

        card = self.snapshot.get(tool_id)
        if card is None:
            with session.lock:
                if not record.terminal:
                    return self._finish(
                        session, STATUS_FAILED, REASON_UNKNOWN_TOOL, "error", f"unknown tool {tool_id!r}"
                    )
                return record

        record.status = STATUS_VALIDATING
        report = validate_value(query, card.input_schema)
        if not report.ok:
            first = report.violations[0]
            with session.lock:
                if not record.terminal:
                    return self._finish(
                        session,
                        STATUS_FAILED,
                        REASON_SCHEMA_VIOLATION,
                        "schema_violation",
                        f"{first.path or '/'}: {first.message}",
                    )
                return record
        self._feedback(session, "validated", "query conforms to input schema")

        if state is not None:
            state_set = frozenset(state)
            if not preconditions_satisfied(card.preconditions, state_set):
                missing = sorted(card.preconditions.require - state_set)
                blocked = sorted(card.preconditions.forbid & state_set)
                with session.lock:
                    if not record.terminal:
                        return self._finish(
                            session,
                            STATUS_FAILED,
                            REASON_PRECONDITION_UNSATISFIED,
                            "precondition_unsatisfied",
                            f"missing={missing} forbidden={blocked}",
                        )
                    return record
            self._feedback(session, "preconditions_checked", "state satisfies preconditions")

        if self.image_root is not None:
            missing_image = self._missing_image(query, card.input_schema)
            if missing_image is not None:
                with session.lock:
                    if not record.terminal:
                        return self._finish(
                            session,
                            STATUS_FAILED,
                            REASON_TOOL_FAULT,
                            "fault",
                            f"missing image file: {missing_image}",
                        )
                    return record

        executor = self._executors.get(tool_id)
        if executor is None:
            with session.lock:
                if not record.terminal:
                    return self._finish(
                        session, STATUS_FAILED, REASON_TOOL_FAULT, "fault", "no executor registered"
                    )
                return record

        record.status = STATUS_RUNNING
        self._feedback(session, "running", "executor started")

        result: dict[str, Any] = {}
        deadline_real = time.monotonic() + timeout / 1000.0
        deadline_ms = int(deadline_real * 1000)

        def _run() -> None:
            try:
                result["output"] = executor(query, seed, deadline_ms)
            except ToolFaultError as exc:
                result["fault"] = str(exc)
            except Exception as exc:  # executor bugs surface as tool faults
                result["fault"] = f"{type(exc).__name__}: {exc}"

        worker = threading.Thread(target=_run, daemon=True)
        worker.start()
        while worker.is_alive():
            if session.cancel_event.is_set():
                with session.lock:
                    return record  # cancel() already finalized the record
            if time.monotonic() >= deadline_real:
                with session.lock:
                    if not record.terminal:
                        finished = self._finish(
                            session, STATUS_FAILED, REASON_TIMEOUT, "timeout", f"exceeded {timeout} ms"
                        )
                        # Timed-out sessions must report at least the budget.
                        finished.ended_at = max(finished.ended_at, finished.started_at + timeout)
                        return finished
                    return record
            worker.join(_POLL_S)

        with session.lock:
            if record.terminal:  # cancelled while the executor was finishing
                return record
            if "fault" in result:
                return self._finish(session, STATUS_FAILED, REASON_TOOL_FAULT, "fault", result["fault"])
            output = result.get("output")
            out_report = validate_value(output, card.output_schema)
            if not out_report.ok:
                first = out_report.violations[0]
                return self._finish(
                    session,
                    STATUS_FAILED,
                    REASON_TOOL_FAULT,
                    "fault",
                    f"output schema violation at {first.path or '/'}: {first.message}",
                )
            record.output = output
            return self._finish(session, STATUS_COMPLETED, None, "executed", "output conforms to output schema")

    def invoke_many(
        self, requests: Sequence[InvokeRequest], *, max_workers: int = 8
    ) -> list[SessionRecord]:
        """Run a batch concurrently; results are positional with requests."""
        if not requests:
            return []

        def _one(request: InvokeRequest) -> SessionRecord:
            return self.invoke(
                request.tool_id,
                request.query,
                timeout_ms=request.timeout_ms,
                seed=request.seed,
                state=request.state,
            )

        with ThreadPoolExecutor(max_workers=min(max_workers, len(requests))) as pool:
            return list(pool.map(_one, requests))

    # -- helpers -------------------------------------------------------------

    def _missing_image(self, value: Any, schema: SchemaNode) -> str | None:
        """First ImageRef in ``value`` whose file is absent under image_root."""
        if schema.kind == "image_ref" and isinstance(value, str):
            if not (self.image_root / value).exists():  # type: ignore[operator]
                return value
            return None
        if schema.kind == "array" and isinstance(value, list) and schema.element is not None:
            for item in value:
                found = self._missing_image(item, schema.element)
                if found:
                    return found
        if schema.kind == "object" and isinstance(value, dict) and schema.fields:
            for name in sorted(value):
                if name in schema.fields:
                    found = self._missing_image(value[name], schema.fields[name])
                    if found:
                        return found
        return None
