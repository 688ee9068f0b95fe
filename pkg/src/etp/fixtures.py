"""Trajectory fixtures: recorded expert episodes used for generation and replay.

A fixture episode carries an instruction, per-step observations and state
atoms, gold tool invocations with their recorded outputs, gold actions (tool
conditioned and no-tool fallback), and one or more chain segments. The
bundled pack lives in ``etp/fixtures`` as package data; any directory with
the same layout works.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .canonical import canonical_dumps
from .registry import Registry, load_registry_file
from .toolchain import Binding

__all__ = [
    "FixtureError",
    "FixtureStep",
    "ChainFixture",
    "TrajectoryFixture",
    "load_trajectory",
    "load_fixture_dir",
    "packaged_fixture_root",
    "packaged_trajectory_dir",
    "load_packaged_registry",
    "load_packaged_cards",
    "build_mock_tables",
    "TOOL_INDUCING_KEYWORDS",
]

# Fixed trigger vocabulary for tool-inducing negatives.
TOOL_INDUCING_KEYWORDS = ("detect", "grasp", "navigate to", "locate", "segment")


class FixtureError(Exception):
    """A fixture file is missing fields or internally inconsistent."""


@dataclass(frozen=True)
class FixtureStep:
    index: int
    observation: str
    state: frozenset[str]
    sampleable: bool
    action_description: str
    env_feedback: str
    last_action_success: bool | None
    needs_tool: bool
    gold_call: dict[str, Any] | None
    gold_output: Any
    gold_action: dict[str, Any]
    fallback_action: dict[str, Any] | None
    goal_atom: str | None
    negative_kind: str | None

    def to_json(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "observation": self.observation,
            "state": sorted(self.state),
            "sampleable": self.sampleable,
            "action_description": self.action_description,
            "env_feedback": self.env_feedback,
            "last_action_success": self.last_action_success,
            "needs_tool": self.needs_tool,
            "gold_call": self.gold_call,
            "gold_output": self.gold_output,
            "gold_action": self.gold_action,
            "fallback_action": self.fallback_action,
            "goal_atom": self.goal_atom,
            "negative_kind": self.negative_kind,
        }


@dataclass(frozen=True)
class ChainFixture:
    chain_id: str
    kind: str  # primary chains mirror the episode's tool steps
    tools: tuple[str, ...]
    bindings: tuple[Binding, ...]
    initial_state: frozenset[str]
    goal_atom: str
    start_index: int

    def to_json(self) -> dict[str, Any]:
        return {
            "chain_id": self.chain_id,
            "kind": self.kind,
            "tools": list(self.tools),
            "bindings": [b.to_json() for b in self.bindings],
            "initial_state": sorted(self.initial_state),
            "goal_atom": self.goal_atom,
            "start_index": self.start_index,
        }


@dataclass(frozen=True)
class TrajectoryFixture:
    episode_id: str
    env: str
    difficulty: str
    instruction: str
    initial_state: frozenset[str]
    steps: tuple[FixtureStep, ...]
    chains: tuple[ChainFixture, ...] = ()

    @property
    def tool_inducing(self) -> bool:
        lowered = self.instruction.lower()
        return any(keyword in lowered for keyword in TOOL_INDUCING_KEYWORDS)

    def to_json(self) -> dict[str, Any]:
        return {
            "episode_id": self.episode_id,
            "env": self.env,
            "difficulty": self.difficulty,
            "instruction": self.instruction,
            "initial_state": sorted(self.initial_state),
            "steps": [s.to_json() for s in self.steps],
            "chains": [c.to_json() for c in self.chains],
        }


_ENVS = {"alfred", "habitat", "navigation", "manipulation"}
_DIFFICULTIES = {"easy", "medium", "hard"}


def _step_from_json(obj: dict[str, Any], episode_id: str) -> FixtureStep:
    try:
        return FixtureStep(
            index=int(obj["index"]),
            observation=str(obj["observation"]),
            state=frozenset(obj["state"]),
            sampleable=bool(obj["sampleable"]),
            action_description=str(obj["action_description"]),
            env_feedback=str(obj["env_feedback"]),
            last_action_success=obj.get("last_action_success"),
            needs_tool=bool(obj["needs_tool"]),
            gold_call=obj.get("gold_call"),
            gold_output=obj.get("gold_output"),
            gold_action=obj["gold_action"],
            fallback_action=obj.get("fallback_action"),
            goal_atom=obj.get("goal_atom"),
            negative_kind=obj.get("negative_kind"),
        )
    except KeyError as exc:
        raise FixtureError(f"{episode_id}: step missing field {exc}") from exc


def trajectory_from_json(obj: dict[str, Any]) -> TrajectoryFixture:
    try:
        episode_id = obj["episode_id"]
        env = obj["env"]
        difficulty = obj["difficulty"]
        instruction = obj["instruction"]
        steps_raw = obj["steps"]
    except KeyError as exc:
        raise FixtureError(f"trajectory missing field {exc}") from exc
    if env not in _ENVS:
        raise FixtureError(f"{episode_id}: unknown env {env!r}")
    if difficulty not in _DIFFICULTIES:
        raise FixtureError(f"{episode_id}: unknown difficulty {difficulty!r}")
    if not steps_raw:
        raise FixtureError(f"{episode_id}: no steps")
    steps = tuple(_step_from_json(s, episode_id) for s in steps_raw)
    for step in steps:
        if step.needs_tool and (step.gold_call is None or step.gold_output is None):
            raise FixtureError(f"{episode_id}: tool step {step.index} lacks gold call/output")
    chains = tuple(
        ChainFixture(
            chain_id=c["chain_id"],
            kind=c["kind"],
            tools=tuple(c["tools"]),
            bindings=tuple(Binding.from_json(b) for b in c.get("bindings", [])),
            initial_state=frozenset(c["initial_state"]),
            goal_atom=c["goal_atom"],
            start_index=int(c.get("start_index", 0)),
        )
        for c in obj.get("chains", [])
    )
    return TrajectoryFixture(
        episode_id=episode_id,
        env=env,
        difficulty=difficulty,
        instruction=instruction,
        initial_state=frozenset(obj.get("initial_state", [])),
        steps=steps,
        chains=chains,
    )


def load_trajectory(path: str | Path) -> TrajectoryFixture:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{path}: invalid JSON: {exc}") from exc
    return trajectory_from_json(obj)


def load_fixture_dir(directory: str | Path) -> list[TrajectoryFixture]:
    """All episode fixtures in a directory, ordered by episode_id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FixtureError(f"not a fixture directory: {directory}")
    fixtures = [load_trajectory(p) for p in sorted(directory.glob("*.json"))]
    if not fixtures:
        raise FixtureError(f"no trajectory fixtures under {directory}")
    seen: set[str] = set()
    for fixture in fixtures:
        if fixture.episode_id in seen:
            raise FixtureError(f"duplicate episode_id {fixture.episode_id}")
        seen.add(fixture.episode_id)
    return sorted(fixtures, key=lambda f: f.episode_id)


def packaged_fixture_root() -> Path:
    """Filesystem path of the bundled fixture pack."""
    return Path(str(resources.files("etp") / "fixtures"))


def packaged_trajectory_dir() -> Path:
    return packaged_fixture_root() / "trajectories"


def load_packaged_registry() -> Registry:
    return load_registry_file(packaged_fixture_root() / "registry_112.json")


def load_packaged_cards() -> list[Path]:
    """Paths of the individual card files in the bundled pack."""
    return sorted((packaged_fixture_root() / "cards").glob("*.json"))


def build_mock_tables(fixtures: list[TrajectoryFixture]) -> dict[str, dict[str, Any]]:
    """Mock executor tables keyed by tool, from recorded gold invocations."""
    tables: dict[str, dict[str, Any]] = {}
    for fixture in fixtures:
        for step in fixture.steps:
            if step.gold_call is None or step.gold_output is None:
                continue
            tool_id = step.gold_call["tool_id"]
            key = canonical_dumps(step.gold_call["arguments"])
            tables.setdefault(tool_id, {})[key] = step.gold_output
    return tables
