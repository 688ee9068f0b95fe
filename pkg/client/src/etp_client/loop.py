"""Two-pass agent loop producing harness-compatible JSONL traces.

Each step runs the decision function twice: once to plan (does this step
need a tool, and which calls), once to act after the tool results are in.
Rows are streamed to disk as they finish, so a dropped connection leaves a
valid, scoreable prefix behind; the sidecar meta file records truncation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .client import ClientError, InvokeResult, RemoteToolClient
from .wire import canonical_dumps

MAX_TOOL_CALLS = 3

# volatile per-run session fields, never written to trace rows
_VOLATILE = ("session_id", "started_at", "ended_at", "duration_ms")


@dataclass(frozen=True)
class StepView:
    """What the decision function sees at one step."""

    episode: dict[str, Any]
    step: dict[str, Any]
    state: frozenset[str]
    history: tuple[dict[str, Any], ...]


DecisionFn = Callable[[StepView, list[InvokeResult] | None], dict[str, Any]]


@dataclass
class LoopResult:
    path: Path
    rows: int = 0
    episodes: int = 0
    truncated: bool = False
    error: str | None = None
    meta_path: Path | None = None


def _stable_session(result: InvokeResult, tool_id: str, arguments: Any) -> dict[str, Any]:
    if result.ok and result.session is not None:
        session = dict(result.session)
        for key in _VOLATILE:
            session.pop(key, None)
        session["feedback"] = [
            {"event": entry["event"], "detail": entry["detail"]}
            for entry in session.get("feedback", [])
        ]
        return session
    return {
        "tool_id": tool_id,
        "query": arguments,
        "status": "failed",
        "reason": result.reason,
        "output": None,
        "feedback": [{"event": "error", "detail": result.message}],
    }


def _effects_map(client: RemoteToolClient) -> dict[str, tuple[frozenset[str], frozenset[str]]]:
    cards = client.list_tools()["tools"]
    return {
        card["tool_id"]: (
            frozenset(card["effects"]["add"]),
            frozenset(card["effects"]["delete"]),
        )
        for card in cards
    }


def _gold(step: dict[str, Any]) -> dict[str, Any]:
    call = step.get("gold_call")
    gold: dict[str, Any] = {
        "need_tool": step["needs_tool"],
        "tool_id": call["tool_id"] if call else None,
        "action": step["gold_action"],
    }
    if step.get("fallback_action") is not None:
        gold["fallback_action"] = step["fallback_action"]
    return gold


def _history_row(step: dict[str, Any]) -> dict[str, Any]:
    return {
        "step": step["index"],
        "action": step.get("action_description", ""),
        "feedback": step.get("env_feedback", ""),
        "image_path": step.get("observation", ""),
    }


def agent_loop(
    client: RemoteToolClient,
    decision_fn: DecisionFn,
    episodes: Iterable[dict[str, Any]],
    out_path: str | Path,
    *,
    max_tool_calls: int = MAX_TOOL_CALLS,
    check_state: bool = True,
) -> LoopResult:
    """Drive episodes against remote tools; returns where the trace landed.

    A connection loss stops the loop, keeps the rows written so far, and
    flags the result (and the ``.meta.json`` sidecar) as truncated.
    """
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    result = LoopResult(path=path)

    effects = _effects_map(client)

    with path.open("w", encoding="utf-8") as sink:
        try:
            for episode in episodes:
                state = frozenset(episode.get("initial_state", ()))
                history: list[dict[str, Any]] = []
                for step in episode["steps"]:
                    view = StepView(episode=episode, step=step, state=state,
                                    history=tuple(history))
                    plan = decision_fn(view, None)
                    calls = list(plan.get("tool_calls") or [])
                    rejected = len(calls) > max_tool_calls
                    results: list[InvokeResult] = []
                    sessions: list[dict[str, Any]] = []
                    if calls and not rejected:
                        for call in calls:
                            outcome = client.invoke(
                                call["tool_id"], call.get("arguments", {}),
                                state=state if check_state else None,
                            )
                            results.append(outcome)
                            sessions.append(_stable_session(
                                outcome, call["tool_id"], call.get("arguments", {})
                            ))
                            if outcome.ok:
                                add, delete = effects.get(
                                    call["tool_id"], (frozenset(), frozenset())
                                )
                                state = frozenset((state - delete) | add)
                    action = decision_fn(view, results)
                    row = {
                        "episode_id": episode["episode_id"],
                        "env": episode["env"],
                        "difficulty": episode["difficulty"],
                        "instruction": episode["instruction"],
                        "step": step["index"],
                        "observation": step["observation"],
                        "decision": {
                            "need_tool": bool(plan.get("need_tool")),
                            "tool_calls": [] if rejected else calls,
                            "action": action,
                        },
                        "sessions": sessions,
                        "post_state": sorted(state),
                        "gold": _gold(step),
                        "injected": None,
                        "rejected": rejected,
                    }
                    sink.write(canonical_dumps(row) + "\n")
                    result.rows += 1
                    history.append(_history_row(step))
                result.episodes += 1
        except ClientError as exc:
            result.truncated = True
            result.error = str(exc)

    meta = {
        "truncated": result.truncated,
        "rows": result.rows,
        "episodes": result.episodes,
        "error": result.error,
    }
    result.meta_path = path.with_name(path.name + ".meta.json")
    result.meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return result


def replay_decision_fn(view: StepView, results: list[InvokeResult] | None) -> dict[str, Any]:
    """Scripted decision function that replays the feed's gold labels."""
    step = view.step
    if results is None:
        call = step.get("gold_call")
        return {
            "need_tool": bool(step["needs_tool"]),
            "tool_calls": [dict(call)] if call else [],
        }
    return step["gold_action"]
