"""Sessioned tool execution: lifecycle, failure reasons, batching."""

from __future__ import annotations

import itertools
import random
import time

import pytest

from etp.canonical import canonical_dumps
from etp.cards import parse_card
from etp.execution import (
    CountingClock,
    ExecutionEngine,
    ExecutionError,
    FAULT,
    InvokeRequest,
    MockExecutor,
    OutputSchemaMismatch,
    REASON_CANCELLED,
    REASON_PRECONDITION_UNSATISFIED,
    REASON_SCHEMA_VIOLATION,
    REASON_TIMEOUT,
    REASON_TOOL_FAULT,
    REASON_UNKNOWN_TOOL,
    STATUS_COMPLETED,
    STATUS_FAILED,
    ToolFaultError,
)
from etp.registry import Registry

from .test_cards import base_card


def detector_card():
    return parse_card(base_card())


QUERY = {"image": "frames/0.png", "text_query": "mug"}
OUTPUT = {"target_ref": "mug_1", "confidence": 0.9}


def make_engine(**kw):
    reg = Registry([detector_card()])
    kw.setdefault("clock", CountingClock())
    engine = ExecutionEngine(reg.snapshot(), **kw)
    return engine


def test_completed_lifecycle_and_feedback_sequence():
    engine = make_engine()
    engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
    record = engine.invoke("tool_demo", QUERY, state={"observation_available"})
    assert record.status == STATUS_COMPLETED
    assert record.reason is None
    assert record.output == OUTPUT
    events = [f.event for f in record.feedback]
    assert events == [
        "created",
        "validated",
        "preconditions_checked",
        "running",
        "executed",
    ]
    assert record.ended_at >= record.started_at
    assert record.duration_ms == record.ended_at - record.started_at


def test_feedback_skips_precondition_stage_without_state():
    engine = make_engine()
    engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
    record = engine.invoke("tool_demo", QUERY)
    assert [f.event for f in record.feedback] == ["created", "validated", "running", "executed"]


def test_unknown_tool():
    engine = make_engine()
    record = engine.invoke("tool_ghost", {})
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_UNKNOWN_TOOL


def test_schema_violation_reports_pointer():
    engine = make_engine()
    record = engine.invoke("tool_demo", {"image": "x.png"})
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_SCHEMA_VIOLATION
    assert "/text_query" in record.feedback[-1].detail


def test_precondition_unsatisfied():
    engine = make_engine()
    engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
    record = engine.invoke("tool_demo", QUERY, state=frozenset())
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_PRECONDITION_UNSATISFIED
    assert "observation_available" in record.feedback[-1].detail
    # state=None skips the check entirely
    assert engine.invoke("tool_demo", QUERY).status == STATUS_COMPLETED


def test_tool_fault_from_mock_default():
    engine = make_engine()
    engine.register_mock_executor("tool_demo", {})
    record = engine.invoke("tool_demo", QUERY)
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_TOOL_FAULT


def test_tool_fault_from_executor_exception():
    engine = make_engine()

    def bad(query, seed, deadline_ms):
        raise ToolFaultError("camera offline")

    engine.register_executor("tool_demo", bad)
    record = engine.invoke("tool_demo", QUERY)
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_TOOL_FAULT
    assert "camera offline" in record.feedback[-1].detail

    def buggy(query, seed, deadline_ms):
        raise KeyError("oops")

    engine2 = make_engine()
    engine2.register_executor("tool_demo", buggy)
    record2 = engine2.invoke("tool_demo", QUERY)
    assert record2.status == STATUS_FAILED
    assert record2.reason == REASON_TOOL_FAULT


def test_no_executor_is_tool_fault():
    engine = make_engine()
    record = engine.invoke("tool_demo", QUERY)
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_TOOL_FAULT
    assert "no executor" in record.feedback[-1].detail


def test_output_schema_enforced_at_completion():
    engine = make_engine()
    engine.register_executor("tool_demo", lambda q, s, d: {"target_ref": "x", "confidence": 2.0})
    record = engine.invoke("tool_demo", QUERY)
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_TOOL_FAULT
    assert "output schema" in record.feedback[-1].detail


def test_mock_table_validated_up_front():
    engine = make_engine()
    with pytest.raises(OutputSchemaMismatch):
        engine.register_mock_executor("tool_demo", {"k": {"target_ref": "x"}})
    with pytest.raises(OutputSchemaMismatch):
        engine.register_mock_executor("tool_demo", {}, default={"bad": True})
    # FAULT default skips default validation
    engine.register_mock_executor("tool_demo", {}, default=FAULT)


def test_register_executor_unknown_tool():
    engine = make_engine()
    with pytest.raises(ExecutionError):
        engine.register_executor("tool_ghost", lambda q, s, d: None)
    with pytest.raises(ExecutionError):
        engine.register_mock_executor("tool_ghost", {})


def test_real_timeout():
    engine = ExecutionEngine(Registry([detector_card()]).snapshot())

    def slow(query, seed, deadline_ms):
        time.sleep(0.5)
        return OUTPUT

    engine.register_executor("tool_demo", slow)
    start = time.monotonic()
    record = engine.invoke("tool_demo", QUERY, timeout_ms=50)
    elapsed = time.monotonic() - start
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_TIMEOUT
    assert elapsed < 0.45  # returned before the executor finished
    assert record.duration_ms >= 50


def test_cancel_running_session():
    engine = ExecutionEngine(Registry([detector_card()]).snapshot())
    engine.register_executor("tool_demo", lambda q, s, d: time.sleep(5) or OUTPUT)
    results = {}

    import threading

    def run():
        results["record"] = engine.invoke(
            "tool_demo", QUERY, session_id="s-cancel", timeout_ms=10_000
        )

    worker = threading.Thread(target=run)
    worker.start()
    deadline = time.monotonic() + 2.0
    while engine.get_session("s-cancel") is None and time.monotonic() < deadline:
        time.sleep(0.005)
    # Wait until the session is running, then cancel it.
    while True:
        record = engine.get_session("s-cancel")
        if record is not None and (record.status == "running" or record.terminal):
            break
        assert time.monotonic() < deadline
        time.sleep(0.005)
    assert engine.cancel("s-cancel") is True
    worker.join(timeout=2.0)
    record = results["record"]
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_CANCELLED
    # Cancelling a terminal session is a no-op.
    assert engine.cancel("s-cancel") is False
    assert engine.cancel("s-ghost") is False


def test_session_status_accessor_and_unique_ids():
    engine = make_engine()
    engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
    record = engine.invoke("tool_demo", QUERY, session_id="s-1")
    assert engine.get_session("s-1") is record
    assert engine.get_session("s-unknown") is None
    with pytest.raises(ExecutionError):
        engine.invoke("tool_demo", QUERY, session_id="s-1")


def test_deterministic_traces_are_byte_equal():
    def run_once():
        engine = ExecutionEngine(
            Registry([detector_card()]).snapshot(),
            clock=CountingClock(start=1000, step=10),
            session_id_factory=map("s-{:06d}".format, itertools.count(1)).__next__,
        )
        engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
        records = [
            engine.invoke("tool_demo", QUERY, state={"observation_available"}),
            engine.invoke("tool_demo", {"image": "x"}),
        ]
        return canonical_dumps([r.to_json() for r in records])

    assert run_once() == run_once()


def test_stable_serialization_drops_volatile_fields():
    engine = make_engine()
    engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
    record = engine.invoke("tool_demo", QUERY)
    stable = record.to_json(stable=True)
    assert "session_id" not in stable
    assert "started_at" not in stable
    assert all("t_ms" not in f for f in stable["feedback"])
    full = record.to_json()
    assert full["session_id"] == record.session_id
    assert full["feedback"][0]["t_ms"] == record.feedback[0].t_ms


def test_invoke_many_results_are_positional():
    engine = make_engine()
    engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
    requests = [
        InvokeRequest("tool_demo", QUERY),
        InvokeRequest("tool_ghost", {}),
        InvokeRequest("tool_demo", {"image": "x"}),
    ]
    records = engine.invoke_many(requests)
    assert [r.tool_id for r in records] == ["tool_demo", "tool_ghost", "tool_demo"]
    assert [r.status for r in records] == [STATUS_COMPLETED, STATUS_FAILED, STATUS_FAILED]
    assert [r.reason for r in records] == [None, REASON_UNKNOWN_TOOL, REASON_SCHEMA_VIOLATION]
    assert engine.invoke_many([]) == []


def test_invoke_many_permutation_invariance():
    """Outcomes depend on the request, not batch order or worker count."""
    base = [
        InvokeRequest("tool_demo", QUERY, state=frozenset({"observation_available"})),
        InvokeRequest("tool_demo", {"image": "x"}),
        InvokeRequest("tool_demo", QUERY, state=frozenset()),
        InvokeRequest("tool_ghost", {}),
    ]

    def outcomes(requests, workers):
        engine = make_engine()
        engine.register_mock_executor("tool_demo", {canonical_dumps(QUERY): OUTPUT})
        records = engine.invoke_many(requests, max_workers=workers)
        keyed = {}
        for request, record in zip(requests, records):
            key = (request.tool_id, canonical_dumps(request.query), request.state)
            keyed[key] = (record.status, record.reason)
        return keyed

    want = outcomes(base, 1)
    rng = random.Random(3)
    for workers in (1, 2, 8):
        shuffled = base[:]
        rng.shuffle(shuffled)
        assert outcomes(shuffled, workers) == want


def test_image_root_gating(tmp_path):
    (tmp_path / "frames").mkdir()
    (tmp_path / "frames" / "0.png").write_bytes(b"\x89PNG")
    engine = ExecutionEngine(
        Registry([detector_card()]).snapshot(),
        clock=CountingClock(),
        image_root=tmp_path,
    )
    engine.register_mock_executor(
        "tool_demo",
        {
            canonical_dumps(QUERY): OUTPUT,
            canonical_dumps({"image": "frames/missing.png", "text_query": "mug"}): OUTPUT,
        },
    )
    assert engine.invoke("tool_demo", QUERY).status == STATUS_COMPLETED
    record = engine.invoke("tool_demo", {"image": "frames/missing.png", "text_query": "mug"})
    assert record.status == STATUS_FAILED
    assert record.reason == REASON_TOOL_FAULT
    assert "missing image" in record.feedback[-1].detail


def test_mock_executor_key_normalization():
    # String table keys are taken as already-canonical serializations.
    mock = MockExecutor({canonical_dumps({"b": 1, "a": 2}): OUTPUT})
    assert mock({"a": 2, "b": 1}, 0, 0) == OUTPUT
    # Non-string keys are canonicalized at construction time.
    mock2 = MockExecutor({("a", 2): OUTPUT})
    assert mock2(["a", 2], 0, 0) == OUTPUT
    with pytest.raises(ToolFaultError):
        mock({"a": 99}, 0, 0)
    assert MockExecutor({}, default={"ok": 1})({"a": 1}, 0, 0) == {"ok": 1}


def test_counting_clock_is_monotonic_and_thread_safe():
    clock = CountingClock(start=5, step=3)
    assert [clock.now_ms() for _ in range(3)] == [5, 8, 11]
