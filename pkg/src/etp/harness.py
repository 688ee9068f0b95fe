"""Episode harness: replay fixture episodes against mock tools.

An agent sees each step twice: once to plan (does this step need a tool, and
which calls), then again with the tool results to commit a final action. The
harness executes planned calls through an ExecutionEngine, threads the STRIPS
state forward, and emits one JSONL row per step. Failed sessions are recorded
like any other result; a plan with more than ``max_tool_calls`` calls is
rejected without executing anything.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol

from .canonical import canonical_dumps
from .cards import SchemaNode, apply_effects, preconditions_satisfied
from .execution import ExecutionEngine, InvokeRequest, SessionRecord
from .fixtures import FixtureStep, TrajectoryFixture, build_mock_tables
from .metrics import (
    FAILURE_CATEGORIES,
    classify_failure,
    score_chain,
    score_execution,
    score_need_recognition,
    score_selection,
)
from .registry import RegistrySnapshot
from .toolchain import ChainSpec, derive_constraints

__all__ = [
    "HarnessError",
    "IncompleteGold",
    "FixtureExhausted",
    "StepContext",
    "PlanDecision",
    "Agent",
    "StepTrace",
    "EpisodeTrace",
    "run_episode",
    "run_suite",
    "make_oracle_agent",
    "make_noisy_agent",
    "example_value",
    "write_traces",
    "load_trace_rows",
    "build_chain_specs",
    "score_trace_rows",
    "oracle_predictions",
    "DEFAULT_MAX_TOOL_CALLS",
]

DEFAULT_MAX_TOOL_CALLS = 3


class HarnessError(Exception):
    """Episode replay failed."""


class IncompleteGold(HarnessError):
    """A fixture step lacks the annotations the harness needs."""


class FixtureExhausted(HarnessError):
    """A scripted agent was asked for more steps than it holds."""


@dataclass(frozen=True)
class StepContext:
    """Everything an agent may look at when deciding a step."""

    fixture: TrajectoryFixture
    step: FixtureStep
    state: frozenset[str]
    history: tuple[dict[str, Any], ...]


@dataclass(frozen=True)
class PlanDecision:
    need_tool: bool
    tool_calls: tuple[dict[str, Any], ...] = ()


class Agent(Protocol):
    def plan(self, context: StepContext) -> PlanDecision: ...

    def act(self, context: StepContext,
            sessions: list[SessionRecord]) -> dict[str, Any]: ...


@dataclass
class StepTrace:
    index: int
    observation: str
    decision: dict[str, Any]
    sessions: list[SessionRecord]
    post_state: frozenset[str]
    gold: dict[str, Any]
    injected: str | None
    rejected: bool

    def to_row(self, fixture: TrajectoryFixture) -> dict[str, Any]:
        return {
            "episode_id": fixture.episode_id,
            "env": fixture.env,
            "difficulty": fixture.difficulty,
            "instruction": fixture.instruction,
            "step": self.index,
            "observation": self.observation,
            "decision": self.decision,
            "sessions": [s.to_json(stable=True) for s in self.sessions],
            "post_state": sorted(self.post_state),
            "gold": self.gold,
            "injected": self.injected,
            "rejected": self.rejected,
        }


@dataclass
class EpisodeTrace:
    fixture: TrajectoryFixture
    steps: list[StepTrace] = field(default_factory=list)

    def to_rows(self) -> list[dict[str, Any]]:
        return [s.to_row(self.fixture) for s in self.steps]


# --------------------------------------------------------------------------
# example values for schema-valid synthetic queries

def example_value(schema: SchemaNode, rng: random.Random | None = None) -> Any:
    """A minimal value accepted by the schema. Constraint patterns are not
    synthesized; fixture schemas do not use them on inputs."""
    rng = rng or random.Random(0)
    kind = schema.kind
    if kind == "string":
        text = "example"
        if schema.min is not None and len(text) < schema.min:
            text = text + "x" * (int(schema.min) - len(text))
        if schema.max is not None and len(text) > schema.max:
            text = text[: int(schema.max)]
        return text
    if kind == "integer":
        low = 1 if schema.min is None else int(schema.min)
        high = low if schema.max is None else int(schema.max)
        return min(max(low, 1), high) if high >= low else low
    if kind == "number":
        low = 0.5 if schema.min is None else float(schema.min)
        if schema.max is not None:
            return min(max(low, float(schema.min or 0.0)), float(schema.max))
        return low
    if kind == "boolean":
        return True
    if kind == "enum":
        return schema.values[0]
    if kind == "array":
        count = int(schema.min) if schema.min else 1
        return [example_value(schema.element, rng) for _ in range(count)]
    if kind == "object":
        return {
            name: example_value(schema.fields[name], rng)
            for name in schema.required
        }
    if kind == "image_ref":
        return "images/example.png"
    return "any"


# --------------------------------------------------------------------------
# episode execution

def _history_row(step: FixtureStep) -> dict[str, Any]:
    return {
        "step": step.index,
        "action": step.action_description,
        "feedback": step.env_feedback,
        "image_path": step.observation,
    }


def run_episode(fixture: TrajectoryFixture,
                registry: RegistrySnapshot,
                agent: Any,
                *,
                engine: ExecutionEngine | None = None,
                max_tool_calls: int = DEFAULT_MAX_TOOL_CALLS,
                check_state: bool = True) -> EpisodeTrace:
    """Replay one fixture episode with the given agent.

    When no engine is supplied, one is built with mock executors loaded from
    the fixture's own gold invocations.
    """
    if engine is None:
        engine = ExecutionEngine(registry)
        for tool_id, table in build_mock_tables([fixture]).items():
            engine.register_mock_executor(tool_id, table)

    trace = EpisodeTrace(fixture)
    state = frozenset(fixture.initial_state)
    history: list[dict[str, Any]] = []

    for step in fixture.steps:
        if step.gold_action is None:
            raise IncompleteGold(
                f"{fixture.episode_id}: step {step.index} lacks a gold action"
            )
        context = StepContext(fixture, step, state, tuple(history))
        plan = agent.plan(context)
        calls = list(plan.tool_calls)
        rejected = len(calls) > max_tool_calls
        sessions: list[SessionRecord] = []
        if calls and not rejected:
            requests = [
                InvokeRequest(
                    tool_id=call["tool_id"],
                    query=call.get("arguments", {}),
                    state=state if check_state else None,
                )
                for call in calls
            ]
            sessions = engine.invoke_many(requests)
            for session in sessions:
                if session.status != "completed":
                    continue
                card = registry.get(session.tool_id)
                if card is not None:
                    state = apply_effects(state, card.effects)
        action = agent.act(context, sessions)

        gold: dict[str, Any] = {
            "need_tool": step.needs_tool,
            "tool_id": step.gold_call["tool_id"] if step.gold_call else None,
            "action": step.gold_action,
        }
        if step.fallback_action is not None:
            gold["fallback_action"] = step.fallback_action
        decision = {
            "need_tool": bool(plan.need_tool),
            "tool_calls": calls if not rejected else [],
            "action": action,
        }
        injected = getattr(agent, "last_injected", None)
        trace.steps.append(StepTrace(
            index=step.index,
            observation=step.observation,
            decision=decision,
            sessions=sessions,
            post_state=state,
            gold=gold,
            injected=injected,
            rejected=rejected,
        ))
        history.append(_history_row(step))
    return trace


def run_suite(fixtures: Iterable[TrajectoryFixture],
              registry: RegistrySnapshot,
              agent_factory: Callable[[], Any] | Any,
              *,
              engine: ExecutionEngine | None = None,
              passes: int = 1,
              check_state: bool = True) -> list[EpisodeTrace]:
    """Replay many episodes; the same agent object is reused when a plain
    agent is given, a fresh one per episode when a factory is given.

    Fault-injection suites should pass ``check_state=False`` so a corrupted
    step cannot starve later steps of their preconditions; each injected
    fault then keeps its own classification signature.
    """
    fixtures = list(fixtures)
    shared_engine = engine
    if shared_engine is None:
        shared_engine = ExecutionEngine(registry)
        for tool_id, table in build_mock_tables(fixtures).items():
            shared_engine.register_mock_executor(tool_id, table)
    traces = []
    for _ in range(passes):
        for fixture in fixtures:
            agent = agent_factory() if callable(agent_factory) else agent_factory
            traces.append(run_episode(
                fixture, registry, agent, engine=shared_engine,
                check_state=check_state,
            ))
    return traces


# --------------------------------------------------------------------------
# scripted agents

class _OracleAgent:
    """Replays the fixture's gold plan verbatim."""

    last_injected = None

    def plan(self, context: StepContext) -> PlanDecision:
        step = context.step
        if not step.needs_tool:
            return PlanDecision(need_tool=False)
        if step.gold_call is None:
            raise IncompleteGold(
                f"{context.fixture.episode_id}: step {step.index} has no gold call"
            )
        return PlanDecision(need_tool=True, tool_calls=(dict(step.gold_call),))

    def act(self, context: StepContext,
            sessions: list[SessionRecord]) -> dict[str, Any]:
        return dict(context.step.gold_action)


def make_oracle_agent() -> _OracleAgent:
    return _OracleAgent()


_INJECTION_SLOTS = (
    "missed_tool_invocation",
    "wrong_selection",
    "invalid_tool_call",
    "ignored_output",
    "tool_induced_bias",
)


class _NoisyAgent:
    """Corrupts gold behaviour at fixed per-slot rates.

    One uniform draw per tool step selects at most one corruption; the label
    of the injected fault is exposed on ``last_injected`` so traces can be
    checked against the classifier.
    """

    def __init__(self, registry: RegistrySnapshot,
                 rates: tuple[float, float, float, float, float],
                 seed: int = 0) -> None:
        if len(rates) != 5 or any(r < 0 for r in rates) or sum(rates) > 1:
            raise ValueError("rates must be five non-negative values summing <= 1")
        self.registry = registry
        self.rates = rates
        self.rng = random.Random(seed)
        self.last_injected: str | None = None
        self._pending_action: dict[str, Any] | None = None

    def _slot(self) -> str | None:
        u = self.rng.random()
        edge = 0.0
        for rate, slot in zip(self.rates, _INJECTION_SLOTS):
            edge += rate
            if u < edge:
                return slot
        return None

    def _wrong_tool(self, context: StepContext, gold_id: str) -> str:
        usable = [
            card.tool_id for card in self.registry
            if card.tool_id != gold_id
            and preconditions_satisfied(card.preconditions, context.state)
        ]
        if not usable:
            raise HarnessError("no satisfiable wrong tool available")
        return self.rng.choice(usable)

    def plan(self, context: StepContext) -> PlanDecision:
        step = context.step
        self.last_injected = None
        self._pending_action = None
        if not step.needs_tool:
            return PlanDecision(need_tool=False)
        if step.gold_call is None or step.gold_output is None:
            raise IncompleteGold(
                f"{context.fixture.episode_id}: step {step.index} is unusable"
            )
        slot = self._slot()
        self.last_injected = slot
        gold_call = dict(step.gold_call)

        if slot == "missed_tool_invocation":
            self._pending_action = dict(step.fallback_action or
                                        {"action_type": "wait", "target": "",
                                         "reference": {}})
            return PlanDecision(need_tool=False)

        if slot == "wrong_selection":
            wrong_id = self._wrong_tool(context, gold_call["tool_id"])
            card = self.registry.get(wrong_id)
            call = {"tool_id": wrong_id,
                    "arguments": example_value(card.input_schema, self.rng)}
            self._pending_action = dict(step.gold_action)
            return PlanDecision(need_tool=True, tool_calls=(call,))

        if slot == "invalid_tool_call":
            card = self.registry.get(gold_call["tool_id"])
            required = list(card.input_schema.required or ())
            arguments = dict(gold_call["arguments"])
            if required:
                arguments.pop(required[0], None)
            else:
                arguments["__unexpected__"] = 1
            call = {"tool_id": gold_call["tool_id"], "arguments": arguments}
            self._pending_action = dict(step.gold_action)
            return PlanDecision(need_tool=True, tool_calls=(call,))

        if slot == "ignored_output":
            self._pending_action = dict(step.fallback_action or step.gold_action)
            return PlanDecision(need_tool=True, tool_calls=(gold_call,))

        if slot == "tool_induced_bias":
            action = {k: (dict(v) if isinstance(v, dict) else v)
                      for k, v in step.gold_action.items()}
            reference = dict(action.get("reference", {}))
            decoy = None
            output = step.gold_output
            if isinstance(output, dict):
                decoys = output.get("candidates")
                if isinstance(decoys, list) and decoys:
                    decoy = decoys[0]
            if decoy is None:
                raise IncompleteGold(
                    f"{context.fixture.episode_id}: step {step.index} output "
                    "has no decoy reference for bias injection"
                )
            for key, value in list(reference.items()):
                reference[key] = [decoy] if isinstance(value, list) else decoy
            action["reference"] = reference
            self._pending_action = action
            return PlanDecision(need_tool=True, tool_calls=(gold_call,))

        self._pending_action = dict(step.gold_action)
        return PlanDecision(need_tool=True, tool_calls=(gold_call,))

    def act(self, context: StepContext,
            sessions: list[SessionRecord]) -> dict[str, Any]:
        if self._pending_action is not None:
            return self._pending_action
        return dict(context.step.gold_action)


def make_noisy_agent(registry: RegistrySnapshot,
                     rates: tuple[float, float, float, float, float],
                     seed: int = 0) -> _NoisyAgent:
    return _NoisyAgent(registry, rates, seed)


# --------------------------------------------------------------------------
# trace IO and scoring

def write_traces(traces: Iterable[EpisodeTrace], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for trace in traces:
            for row in trace.to_rows():
                fh.write(canonical_dumps(row) + "\n")
    return path


def load_trace_rows(path: str | Path) -> list[dict[str, Any]]:
    import json

    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def build_chain_specs(fixtures: Iterable[TrajectoryFixture],
                      registry: RegistrySnapshot) -> dict[str, ChainSpec]:
    """Primary chain spec per episode, derived from cards and bindings."""
    specs: dict[str, ChainSpec] = {}
    for fixture in fixtures:
        primary = next((c for c in fixture.chains if c.kind == "primary"), None)
        if primary is None:
            continue
        cards = [registry.get(t) for t in primary.tools]
        if any(c is None for c in cards):
            raise HarnessError(
                f"{fixture.episode_id}: chain tool missing from registry"
            )
        specs[fixture.episode_id] = ChainSpec(
            gold_set=frozenset(primary.tools),
            constraints=derive_constraints(cards, primary.bindings),
            bindings=primary.bindings,
        )
    return specs


def _classify_row(row: dict[str, Any]) -> str | None:
    return classify_failure({
        "gold": row["gold"],
        "decision": row["decision"],
        "sessions": row["sessions"],
        "rejected": row.get("rejected", False),
    })


def score_trace_rows(rows: list[dict[str, Any]],
                     chain_specs: dict[str, ChainSpec] | None = None,
                     candidates: frozenset[str] | None = None) -> dict[str, Any]:
    """Score a step-trace across every applicable benchmark axis."""
    if not rows:
        raise HarnessError("empty trace")

    recognition = [(row["decision"]["need_tool"], row["gold"]["need_tool"])
                   for row in rows]
    rec = score_need_recognition(recognition)

    tool_rows = [row for row in rows if row["gold"]["need_tool"]]
    sel_samples = []
    exe_samples = []
    failures = {slot: 0 for slot in FAILURE_CATEGORIES}
    clean = 0
    recovered = 0
    injected_total = 0
    mismatches: list[dict[str, Any]] = []
    for row in tool_rows:
        calls = row["decision"]["tool_calls"]
        predicted = calls[0]["tool_id"] if calls else None
        gold_tool = row["gold"]["tool_id"]
        pool = candidates if candidates is not None else None
        sel_samples.append((predicted, gold_tool,
                            pool if pool is not None
                            else frozenset(x for x in (predicted, gold_tool)
                                           if x is not None)))
        valid = bool(calls) and all(
            s["status"] == "completed" for s in row["sessions"]
        )
        try:
            from .metrics import match_action

            match = match_action(row["decision"]["action"], row["gold"]["action"])
        except Exception:
            match = False
        exe_samples.append((valid, match))

        label = _classify_row(row)
        if label is None:
            clean += 1
        else:
            failures[label] += 1
        if "injected" in row:
            injected = row["injected"]
            if injected is not None or label is not None:
                injected_total += 1
                if injected == label:
                    recovered += 1
                else:
                    mismatches.append({
                        "episode_id": row["episode_id"],
                        "step": row["step"],
                        "injected": injected,
                        "classified": label,
                    })

    report: dict[str, Any] = {
        "steps": len(rows),
        "tool_steps": len(tool_rows),
        "recognition": rec.metrics,
        "failures": {
            "counts": failures,
            "clean": clean,
            "rates": {slot: (failures[slot] / len(tool_rows) if tool_rows else 0.0)
                      for slot in FAILURE_CATEGORIES},
        },
    }
    if injected_total:
        report["injection_recovery"] = {
            "total": injected_total,
            "recovered": recovered,
            "rate": recovered / injected_total,
            "mismatches": mismatches[:10],
        }
    if sel_samples:
        report["selection"] = score_selection(sel_samples).metrics
        report["execution"] = score_execution(exe_samples).metrics

    if chain_specs:
        by_episode: dict[str, list[dict[str, Any]]] = {}
        for row in rows:
            by_episode.setdefault(row["episode_id"], []).append(row)
        chain_samples = []
        for episode_id, spec in sorted(chain_specs.items()):
            episode_rows = by_episode.get(episode_id)
            if not episode_rows:
                continue
            episode_rows.sort(key=lambda r: r["step"])
            sequence = []
            for row in episode_rows:
                calls = row["decision"]["tool_calls"]
                if calls:
                    sequence.append(calls[0]["tool_id"])
            chain_samples.append((tuple(sequence), spec))
        if chain_samples:
            report["chain"] = score_chain(chain_samples).metrics
    return report


# --------------------------------------------------------------------------
# dataset oracle predictions

def oracle_predictions(samples: list[dict[str, Any]],
                       golds: list[dict[str, Any]]) -> list[dict[str, Any]]:
    """Prediction rows that score perfectly against the gold sidecar."""
    by_id = {g["sample_id"]: g for g in golds}
    out = []
    for sample in samples:
        gold = by_id.get(sample["sample_id"])
        if gold is None:
            raise HarnessError(f"gold missing for {sample['sample_id']}")
        task = sample.get("task")
        row: dict[str, Any] = {"sample_id": sample["sample_id"]}
        if task == "need_recognition":
            row["need_tool"] = gold["needs_tool"]
        elif task == "selection":
            row["selected_tool_ids"] = [gold["tool_id"]]
        elif task == "execution":
            row["tool_call"] = gold["tool_call"]
            row["next_action"] = gold["next_action"]
        elif task == "chain":
            row["predicted_tool_sequence"] = gold["tool_sequence"]
        else:
            raise HarnessError(f"unknown task {task!r}")
        out.append(row)
    return out
