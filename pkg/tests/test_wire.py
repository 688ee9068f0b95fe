"""Wire framing, envelopes, and the TCP tool server."""

from __future__ import annotations

import itertools
import json
import socket
import threading
import time
from importlib import resources

import pytest

from etp.canonical import canonical_dumps
from etp.cards import parse_card
from etp.execution import CountingClock, ExecutionEngine
from etp.fixtures import build_mock_tables, load_fixture_dir, packaged_trajectory_dir
from etp.registry import Registry, load_registry_file
from etp.server import BindFailure, ToolServer, serve
from etp.wire import (
    DEFAULT_ADDR,
    ERROR_CODES,
    FrameError,
    FrameReader,
    MAX_FRAME_BYTES,
    METHODS,
    WireConnection,
    WireMessage,
    WireResponse,
    frame_decode,
    frame_encode,
    parse_addr,
)

from .test_cards import base_card

GOLDEN = resources.files("etp") / "fixtures" / "golden"


def golden_bytes(name: str) -> bytes:
    return (GOLDEN / f"{name}.frame").read_bytes()


# --- framing -----------------------------------------------------------------


def test_frame_encode_is_canonical():
    assert frame_encode({"b": 1, "a": [2, True]}) == b'{"a":[2,true],"b":1}\n'
    assert frame_decode(b'{"a":1}\n') == {"a": 1}
    assert frame_decode(b'{"a":1}') == {"a": 1}


def test_frame_decode_errors():
    with pytest.raises(FrameError):
        frame_decode(b"not json\n")
    with pytest.raises(FrameError):
        frame_decode(b"\xff\xfe\n")
    with pytest.raises(FrameError):
        frame_decode(b"x" * (MAX_FRAME_BYTES + 1))


def test_frame_reader_splits_across_feeds():
    reader = FrameReader()
    reader.feed(b'{"a":')
    assert reader.next_frame() is None
    reader.feed(b'1}\n{"b":2}\n{"c"')
    assert reader.next_frame() == b'{"a":1}\n'
    assert reader.next_frame() == b'{"b":2}\n'
    assert reader.next_frame() is None
    reader.feed(b":3}\n")
    assert reader.next_frame() == b'{"c":3}\n'


def test_frame_reader_oversize_resync():
    reader = FrameReader()
    reader.feed(b"x" * (MAX_FRAME_BYTES + 10))
    assert reader.next_frame() is None  # now discarding
    reader.feed(b"yyy\n")
    with pytest.raises(FrameError):
        reader.next_frame()
    # Stream is usable again after the terminator.
    reader.feed(b'{"ok":1}\n')
    assert reader.next_frame() == b'{"ok":1}\n'


def test_frame_reader_oversize_single_buffer():
    reader = FrameReader()
    reader.feed(b"x" * (MAX_FRAME_BYTES + 1) + b"\n" + b'{"ok":1}\n')
    with pytest.raises(FrameError):
        reader.next_frame()
    assert reader.next_frame() == b'{"ok":1}\n'


# --- envelopes ----------------------------------------------------------------


def test_wire_message_round_trip():
    msg = WireMessage(id="m1", method="ping", params={"x": 1})
    assert WireMessage.from_json(msg.to_json()) == msg


@pytest.mark.parametrize(
    "blob",
    [
        "not an object",
        {"method": "ping"},
        {"id": "", "method": "ping"},
        {"id": 3, "method": "ping"},
        {"id": "m", "method": 7},
        {"id": "m", "method": "ping", "bonus": 1},
    ],
)
def test_wire_message_rejects(blob):
    with pytest.raises(FrameError):
        WireMessage.from_json(blob)


def test_wire_response_invariants():
    WireResponse(id="a", ok=True, result={})
    WireResponse(id="a", ok=False, error={"code": "INTERNAL", "message": "x"})
    with pytest.raises(ValueError):
        WireResponse(id="a", ok=True)
    with pytest.raises(ValueError):
        WireResponse(id="a", ok=False, result={})
    # Unknown codes degrade to INTERNAL rather than leaking.
    fallback = WireResponse.failure("a", "NO_SUCH_CODE", "m")
    assert fallback.error["code"] == "INTERNAL"


def test_parse_addr():
    assert parse_addr("127.0.0.1:8750") == ("127.0.0.1", 8750)
    assert parse_addr(DEFAULT_ADDR) == ("127.0.0.1", 8750)
    with pytest.raises(ValueError):
        parse_addr("8750")
    with pytest.raises(ValueError):
        parse_addr(":8750")
    with pytest.raises(ValueError):
        parse_addr("host:nope")


def test_method_and_code_tables():
    assert METHODS == (
        "register",
        "deregister",
        "list_tools",
        "discover",
        "invoke",
        "session_status",
        "cancel",
        "ping",
    )
    assert set(ERROR_CODES) >= {
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
    }


# --- golden frames -------------------------------------------------------------


def test_golden_request_frames_are_byte_reproducible():
    reg_path = resources.files("etp") / "fixtures" / "registry_112.json"
    cards = {c["tool_id"]: c for c in json.loads(reg_path.read_text())}
    requests = {
        "ping": {},
        "list_tools": {},
        "discover": {"group": "perception", "tags_any": ["detection"]},
        "invoke": {
            "tool_id": "tool_yolo_world",
            "query": {"image": "images/u001/step_02.png", "text_query": "pencil"},
            "timeout_ms": 5000,
            "seed": 7,
        },
        "session_status": {"session_id": "s-000001"},
        "cancel": {"session_id": "s-000001"},
        "register": {"card": cards["tool_zoedepth"]},
        "deregister": {"tool_id": "tool_zoedepth"},
    }
    for i, (method, params) in enumerate(sorted(requests.items()), start=1):
        msg = WireMessage(id=f"g{i:06d}", method=method, params=params)
        assert frame_encode(msg.to_json()) == golden_bytes(f"request_{method}"), method


# --- live server ----------------------------------------------------------------


def fixture_registry() -> Registry:
    with resources.as_file(resources.files("etp") / "fixtures" / "registry_112.json") as p:
        return load_registry_file(p)


def deterministic_engine(registry: Registry) -> ExecutionEngine:
    counter = itertools.count(1)
    engine = ExecutionEngine(
        registry.snapshot(),
        clock=CountingClock(start=1000, step=10),
        session_id_factory=lambda: f"s-{next(counter):06d}",
    )
    fixtures = load_fixture_dir(packaged_trajectory_dir())
    for tool_id, table in build_mock_tables(fixtures).items():
        engine.register_mock_executor(tool_id, table)
    return engine


@pytest.fixture()
def live():
    registry = fixture_registry()
    server = ToolServer(registry, engine=deterministic_engine(registry))
    server.start("127.0.0.1:0")
    conn = WireConnection(server.addr)
    yield server, conn
    conn.close()
    server.close()


def test_server_ping_golden_byte_equality(live):
    server, conn = live
    conn.send_raw(golden_bytes("request_ping"))
    raw = _read_raw_frame(conn)
    assert raw == golden_bytes("response_ping")


def test_server_invoke_golden_byte_equality(live):
    server, conn = live
    conn.send_raw(golden_bytes("request_invoke"))
    raw = _read_raw_frame(conn)
    assert raw == golden_bytes("response_invoke")


def test_server_bad_frame_golden_and_survival(live):
    server, conn = live
    conn.send_raw(b"this is not json\n")
    raw = _read_raw_frame(conn)
    assert raw == golden_bytes("response_bad_frame")
    # The connection keeps working afterwards.
    assert conn.request("ping").result == {"pong": True}


def _read_raw_frame(conn: WireConnection) -> bytes:
    while True:
        frame = conn._reader.next_frame()
        if frame is not None:
            return frame
        data = conn._sock.recv(65536)
        if not data:
            raise ConnectionError("closed")
        conn._reader.feed(data)


def test_server_list_and_discover(live):
    server, conn = live
    listed = conn.request("list_tools")
    assert listed.ok
    assert len(listed.result["tools"]) == 112
    assert listed.result["revision"] == 112
    found = conn.request("discover", {"group": "perception", "text": "depth"})
    assert found.ok
    ids = [c["tool_id"] for c in found.result["tools"]]
    assert "tool_zoedepth" in ids
    assert ids == sorted(ids)
    gated = conn.request("discover", {"state": []})
    assert gated.ok
    for card in gated.result["tools"]:
        assert card["preconditions"]["require"] == []


def test_server_discover_bad_params(live):
    server, conn = live
    assert conn.request("discover", {"group": "psychic"}).error["code"] == "BAD_PARAMS"
    assert conn.request("discover", {"bonus": 1}).error["code"] == "BAD_PARAMS"
    assert conn.request("discover", {"tags_any": [3]}).error["code"] == "BAD_PARAMS"


def test_server_invoke_error_codes(live):
    server, conn = live
    assert conn.request("invoke", {"tool_id": "tool_ghost", "query": {}}).error["code"] == "UNKNOWN_TOOL"
    bad_query = conn.request(
        "invoke", {"tool_id": "tool_yolo_world", "query": {"text_query": "x"}}
    )
    assert bad_query.error["code"] == "SCHEMA_VIOLATION"
    gated = conn.request(
        "invoke",
        {
            "tool_id": "tool_yolo_world",
            "query": {"image": "images/u001/step_02.png", "text_query": "pencil"},
            "state": [],
        },
    )
    assert gated.error["code"] == "PRECONDITION_UNSATISFIED"
    assert conn.request("invoke", {"query": {}}).error["code"] == "BAD_PARAMS"
    assert conn.request("invoke", {"tool_id": "tool_yolo_world"}).error["code"] == "BAD_PARAMS"
    assert (
        conn.request("invoke", {"tool_id": "t", "query": {}, "timeout_ms": 0}).error["code"]
        == "BAD_PARAMS"
    )
    fault = conn.request(
        "invoke",
        {"tool_id": "tool_yolo_world", "query": {"image": "zzz.png", "text_query": "zzz"}},
    )
    assert fault.error["code"] == "TOOL_FAULT"


def test_server_session_status_and_cancel(live):
    server, conn = live
    done = conn.request(
        "invoke",
        {
            "tool_id": "tool_yolo_world",
            "query": {"image": "images/u001/step_02.png", "text_query": "pencil"},
            "session_id": "s-manual",
        },
    )
    assert done.ok
    status = conn.request("session_status", {"session_id": "s-manual"})
    assert status.ok
    assert status.result["session"]["status"] == "completed"
    assert conn.request("session_status", {"session_id": "ghost"}).error["code"] == "BAD_PARAMS"
    # Terminal sessions cannot be cancelled.
    cancelled = conn.request("cancel", {"session_id": "s-manual"})
    assert cancelled.ok and cancelled.result["cancelled"] is False


def test_server_unknown_method_and_bad_params_envelope(live):
    server, conn = live
    assert conn.request("teleport").error["code"] == "UNKNOWN_METHOD"
    msg = WireMessage(id="p1", method="ping", params=[1, 2])
    conn.send(msg)
    resp = conn.recv_for("p1")
    assert resp.error["code"] == "BAD_PARAMS"


def test_server_mutation_gated_by_default(live):
    server, conn = live
    card = base_card()
    refused = conn.request("register", {"card": card})
    assert refused.error["code"] == "UNKNOWN_METHOD"
    refused = conn.request("deregister", {"tool_id": "tool_zoedepth"})
    assert refused.error["code"] == "UNKNOWN_METHOD"
    assert len(server.registry) == 112


def test_server_mutation_enabled():
    registry = fixture_registry()
    with ToolServer(registry, allow_mutation=True) as server:
        server.start("127.0.0.1:0")
        with WireConnection(server.addr) as conn:
            added = conn.request("register", {"card": base_card()})
            assert added.ok and added.result["replaced"] is False
            assert added.result["revision"] == 113
            assert conn.request("register", {"card": {"tool_id": "x"}}).error["code"] == "BAD_PARAMS"
            removed = conn.request("deregister", {"tool_id": "tool_demo"})
            assert removed.ok and removed.result["removed"] is True
            # The engine sees the refreshed snapshot.
            listed = conn.request("list_tools")
            assert len(listed.result["tools"]) == 112


def test_server_out_of_order_responses(live):
    server, conn = live
    slow_registry = server.registry
    slow_card = parse_card({**base_card(), "tool_id": "tool_slow"})
    slow_registry.register(slow_card)
    server.engine.update_snapshot(slow_registry.snapshot())
    server.engine.register_executor(
        "tool_slow", lambda q, s, d: time.sleep(0.3) or {"target_ref": "x", "confidence": 0.5}
    )
    slow_msg = WireMessage(
        id="slow-1",
        method="invoke",
        params={"tool_id": "tool_slow", "query": {"image": "a.png", "text_query": "x"}},
    )
    ping_msg = WireMessage(id="fast-1", method="ping", params={})
    conn.send(slow_msg)
    conn.send(ping_msg)
    first = conn.recv_any()
    assert first.id == "fast-1"  # the ping overtakes the slow invoke
    slow = conn.recv_for("slow-1")
    assert slow.ok


def test_server_concurrent_connections_no_id_leakage():
    registry = fixture_registry()
    with ToolServer(registry) as server:
        server.start("127.0.0.1:0")
        errors: list[str] = []

        def worker(tag: str):
            try:
                with WireConnection(server.addr) as conn:
                    ids = [f"{tag}-{i}" for i in range(5)]
                    for msg_id in ids:
                        conn.send(WireMessage(id=msg_id, method="ping", params={}))
                    got = set()
                    for _ in ids:
                        resp = conn.recv_any()
                        if not resp.id.startswith(tag):
                            errors.append(f"{tag} received {resp.id}")
                        got.add(resp.id)
                    if got != set(ids):
                        errors.append(f"{tag} missing {set(ids) - got}")
            except Exception as exc:  # pragma: no cover
                errors.append(f"{tag}: {exc}")

        threads = [threading.Thread(target=worker, args=(f"conn{i:02d}",)) for i in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=30)
        assert errors == []


def test_server_remote_invoke_equals_local_modulo_volatile():
    registry = fixture_registry()
    remote_engine = deterministic_engine(registry)
    local_engine = deterministic_engine(registry)
    params = {
        "tool_id": "tool_yolo_world",
        "query": {"image": "images/u001/step_02.png", "text_query": "pencil"},
        "timeout_ms": 5000,
        "seed": 7,
    }
    with ToolServer(registry, engine=remote_engine) as server:
        server.start("127.0.0.1:0")
        with WireConnection(server.addr) as conn:
            remote = conn.request("invoke", params)
    local = local_engine.invoke(
        params["tool_id"], params["query"], timeout_ms=5000, seed=7
    )
    remote_session = remote.result["session"]
    # Rebuild the stable view: drop session_id and timing fields.
    for volatile in ("session_id", "started_at", "ended_at", "duration_ms"):
        remote_session.pop(volatile)
    for entry in remote_session["feedback"]:
        entry.pop("t_ms")
    assert remote_session == local.to_json(stable=True)


def test_server_bind_failure():
    registry = Registry()
    with ToolServer(registry) as server:
        server.start("127.0.0.1:0")
        other = ToolServer(registry)
        with pytest.raises(BindFailure):
            other.start(server.addr)


def test_serve_helper():
    server = serve("127.0.0.1:0", Registry())
    try:
        with WireConnection(server.addr) as conn:
            assert conn.request("ping").ok
    finally:
        server.close()


def test_server_connection_close_does_not_disturb_others():
    registry = Registry()
    with ToolServer(registry) as server:
        server.start("127.0.0.1:0")
        keep = WireConnection(server.addr)
        drop = WireConnection(server.addr)
        assert drop.request("ping").ok
        drop.close()
        time.sleep(0.05)
        assert keep.request("ping").ok
        keep.close()


def test_server_oversize_frame_answered_and_survives():
    registry = Registry()
    with ToolServer(registry) as server:
        server.start("127.0.0.1:0")
        with WireConnection(server.addr) as conn:
            conn._sock.settimeout(60.0)
            big = b"x" * (MAX_FRAME_BYTES + 2) + b"\n"
            conn.send_raw(big)
            resp = conn.recv_any()
            assert resp.error["code"] == "BAD_FRAME"
            assert conn.request("ping").ok
