"""Benchmark dataset generators.

Four seeded generators turn the trajectory fixture pack plus a registry into
JSONL task datasets with gold sidecars:

  need_recognition   should this step use a tool at all
  selection          pick the right tool among four candidates
  execution          write the tool call, then act on its output
  chain              order a multi-tool dependency chain

Every generator is deterministic in (fixtures, registry, n, seed): two runs
with equal inputs produce byte-identical files.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

from .canonical import canonical_dumps
from .cards import ToolCard, card_to_json, preconditions_satisfied
from .embedding import EmbeddingProvider, HashedBagOfWords, cosine_similarity
from .execution import ExecutionEngine
from .fixtures import FixtureStep, TrajectoryFixture, build_mock_tables
from .registry import RegistrySnapshot
from .toolchain import Binding, ChainSpec, derive_constraints, perturb_noncanonical, plan_order

__all__ = [
    "GenerationError",
    "InsufficientFixtures",
    "InsufficientDistractors",
    "CannotSatisfyMix",
    "GoldInvalid",
    "Dataset",
    "TASKS",
    "generate",
    "gen_need_recognition",
    "gen_selection",
    "gen_execution",
    "gen_chain",
    "dataset_report",
    "write_dataset",
    "read_jsonl",
    "format_style",
]

TASKS = ("need_recognition", "selection", "execution", "chain")

ENVS = ("alfred", "habitat", "manipulation", "navigation")

# presentation style of each benchmark tool family's output
TOOL_STYLE = {
    "tool_yolo_world": "structured",
    "tool_multi_object_pose_estimator": "structured",
    "tool_nav_scene_graph": "structured",
    "tool_query_3d_scene_graph": "natural",
    "tool_obstacle_replanner": "natural",
    "tool_semantic_grasp_planner": "numerical",
    "tool_navigate_to_goal_pose": "numerical",
}

STYLES = ("natural", "numerical", "structured")

POOL_SIZE = 8  # candidate tools attached to each chain sample


class GenerationError(Exception):
    """Dataset generation failed."""


class InsufficientFixtures(GenerationError):
    """The fixture pack cannot supply n samples without replacement."""


class InsufficientDistractors(GenerationError):
    """No distractor satisfying the required property exists."""


class CannotSatisfyMix(GenerationError):
    """Candidate mix constraints cannot be met from this registry."""


class GoldInvalid(GenerationError):
    """A gold invocation failed schema validation or execution."""


@dataclass
class Dataset:
    task: str
    seed: int
    samples: list[dict[str, Any]] = field(default_factory=list)
    golds: list[dict[str, Any]] = field(default_factory=list)


def format_style(tool_id: str) -> str:
    return TOOL_STYLE.get(tool_id, "structured")


# --------------------------------------------------------------------------
# quota helpers

def _env_quotas(n: int) -> dict[str, int]:
    base, rem = divmod(n, len(ENVS))
    return {env: base + (1 if i < rem else 0) for i, env in enumerate(ENVS)}


def _split(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def _apportion(total: int, weights: list[int], highs: list[int]) -> list[int]:
    """Integer apportionment of total by weight, capped per slot."""
    if total > sum(highs):
        raise InsufficientFixtures(
            f"need {total} samples but only {sum(highs)} fixtures available"
        )
    weight_sum = sum(weights) or 1
    out = [min(h, round(total * w / weight_sum)) for w, h in zip(weights, highs)]
    i = 0
    while sum(out) != total:
        j = i % len(out)
        if sum(out) < total and out[j] < highs[j]:
            out[j] += 1
        elif sum(out) > total and out[j] > 0:
            out[j] -= 1
        i += 1
        if i > 10 * len(out) * (total + 1):
            raise InsufficientFixtures("cannot apportion sample quotas")
    return out


StepRef = tuple[TrajectoryFixture, FixtureStep]


def _steps_by_env(fixtures: Iterable[TrajectoryFixture],
                  want_tool: bool) -> dict[str, list[StepRef]]:
    pools: dict[str, list[StepRef]] = {env: [] for env in ENVS}
    for fixture in fixtures:
        if fixture.env not in pools:
            continue
        for step in fixture.steps:
            if step.sampleable and step.needs_tool == want_tool:
                pools[fixture.env].append((fixture, step))
    for pool in pools.values():
        pool.sort(key=lambda ref: (ref[0].episode_id, ref[1].index))
    return pools


def _draw(rng: random.Random, pool: list[StepRef], k: int, label: str) -> list[StepRef]:
    if k > len(pool):
        raise InsufficientFixtures(
            f"need {k} {label} steps but pool holds {len(pool)}"
        )
    return rng.sample(pool, k)


# --------------------------------------------------------------------------
# history rendering

def _history_entries(fixture: TrajectoryFixture, index: int, turns: int,
                     images: int) -> list[dict[str, Any]]:
    turns = min(turns, index)
    chosen = fixture.steps[index - turns:index]
    entries = []
    for offset, step in enumerate(chosen):
        entry: dict[str, Any] = {
            "step": step.index,
            "action": step.action_description,
            "feedback": step.env_feedback,
        }
        # images attach to the most recent turns first
        if offset >= len(chosen) - images:
            entry["image_path"] = step.observation
        entries.append(entry)
    return entries


def _count_profile(n: int, fraction: float) -> int:
    return min(n, round(n * fraction))


def _flags(n: int, k: int, eligible: list[bool]) -> list[bool]:
    """First k eligible positions get True; pads with ineligible False."""
    out = [False] * n
    remaining = k
    for i in range(n):
        if remaining and eligible[i]:
            out[i] = True
            remaining -= 1
    return out


# --------------------------------------------------------------------------
# task 1: need recognition

def gen_need_recognition(fixtures: list[TrajectoryFixture],
                         registry: RegistrySnapshot,
                         n: int = 100, seed: int = 0) -> Dataset:
    if n <= 0:
        raise GenerationError("n must be positive")
    rng = random.Random(("need_recognition", seed).__repr__())
    pos_pools = _steps_by_env(fixtures, want_tool=True)
    neg_pools = _steps_by_env(fixtures, want_tool=False)

    quotas = _env_quotas(n)
    pos_total = (n + 1) // 2
    pos_split = _split(pos_total, len(ENVS))
    picks: list[tuple[str, bool, StepRef]] = []

    neg_quota = {env: quotas[env] - pos_split[i] for i, env in enumerate(ENVS)}
    inducing_pools = {
        env: [ref for ref in neg_pools[env] if ref[0].tool_inducing]
        for env in ENVS
    }
    plain_pools = {
        env: [ref for ref in neg_pools[env] if not ref[0].tool_inducing]
        for env in ENVS
    }
    neg_total = n - pos_total
    inducing_total = math.ceil(0.3 * neg_total)
    inducing_split = _apportion(
        inducing_total,
        [neg_quota[env] for env in ENVS],
        [min(len(inducing_pools[env]), neg_quota[env]) for env in ENVS],
    )

    for i, env in enumerate(ENVS):
        picks.extend(("pos", True, ref)
                     for ref in _draw(rng, pos_pools[env], pos_split[i], f"{env} positive"))
        k_ind = inducing_split[i]
        picks.extend(("ind", False, ref)
                     for ref in _draw(rng, inducing_pools[env], k_ind, f"{env} inducing"))
        picks.extend(("neg", False, ref)
                     for ref in _draw(rng, plain_pools[env], neg_quota[env] - k_ind,
                                      f"{env} negative"))

    rng.shuffle(picks)

    long_turns = _count_profile(n, 0.02)
    eligible = [ref[1].index >= 3 for _, _, ref in picks]
    long_flags = _flags(n, long_turns, eligible)

    dataset = Dataset("need_recognition", seed)
    for i, (kind, needs_tool, (fixture, step)) in enumerate(picks):
        turns = 3 if long_flags[i] else 2
        sample_id = f"rec_{i + 1:06d}"
        dataset.samples.append({
            "sample_id": sample_id,
            "task": "need_recognition",
            "env": fixture.env,
            "difficulty": fixture.difficulty,
            "instruction": fixture.instruction,
            "observation": {"current_rgb": step.observation},
            "history": _history_entries(fixture, step.index, turns, turns),
            "env_feedback": step.env_feedback,
            "last_action_success": step.last_action_success,
        })
        dataset.golds.append({
            "sample_id": sample_id,
            "needs_tool": needs_tool,
            "tool_inducing": kind == "ind",
            "negative_kind": step.negative_kind,
            "episode_id": fixture.episode_id,
            "step_index": step.index,
        })
    return dataset


# --------------------------------------------------------------------------
# task 2: selection

def _ranked_distractors(gold: ToolCard, registry: RegistrySnapshot,
                        embedder: EmbeddingProvider) -> list[ToolCard]:
    anchor = embedder.embed(gold.description)
    scored = []
    for card in registry:
        if card.tool_id == gold.tool_id:
            continue
        score = cosine_similarity(anchor, embedder.embed(card.description))
        scored.append((-score, card.tool_id, card))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [card for _, _, card in scored]


def _pick_candidates(gold: ToolCard, state: frozenset[str], goal_atom: str,
                     ranked: list[ToolCard]) -> list[ToolCard]:
    chosen: list[ToolCard] = []
    inter = 0
    for card in ranked:
        if preconditions_satisfied(card.preconditions, state) \
                and goal_atom in card.effects.add:
            continue  # would be a second correct answer
        if card.capability.group != gold.capability.group:
            if inter >= 1:
                continue
            inter += 1
        chosen.append(card)
        if len(chosen) == 3:
            return chosen
    raise CannotSatisfyMix(
        f"cannot assemble candidates for {gold.tool_id}: "
        f"pool exhausted at {len(chosen)} distractors"
    )


def gen_selection(fixtures: list[TrajectoryFixture],
                  registry: RegistrySnapshot,
                  n: int = 100, seed: int = 0,
                  embedder: EmbeddingProvider | None = None) -> Dataset:
    if n <= 0:
        raise GenerationError("n must be positive")
    embedder = embedder or HashedBagOfWords()
    rng = random.Random(("selection", seed).__repr__())
    pools = _steps_by_env(fixtures, want_tool=True)
    quotas = _env_quotas(n)

    picks: list[StepRef] = []
    for env in ENVS:
        picks.extend(_draw(rng, pools[env], quotas[env], f"{env} positive"))
    rng.shuffle(picks)

    ranked_cache: dict[str, list[ToolCard]] = {}
    long_turns = _count_profile(n, 0.26)
    two_images = _count_profile(n, 0.62)
    eligible = [ref[1].index >= 3 for ref in picks]
    long_flags = _flags(n, long_turns, eligible)
    image_flags = _flags(n, two_images, [True] * n)

    dataset = Dataset("selection", seed)
    for i, (fixture, step) in enumerate(picks):
        gold_id = step.gold_call["tool_id"]
        gold_card = registry.get(gold_id)
        if gold_card is None:
            raise GenerationError(f"fixture tool {gold_id} missing from registry")
        if step.goal_atom is None:
            raise GenerationError(f"{fixture.episode_id}: step {step.index} has no goal atom")
        state = step.state
        if not preconditions_satisfied(gold_card.preconditions, state) \
                or step.goal_atom not in gold_card.effects.add:
            raise GoldInvalid(
                f"{fixture.episode_id}: gold {gold_id} unusable at step {step.index}"
            )
        if gold_id not in ranked_cache:
            ranked_cache[gold_id] = _ranked_distractors(gold_card, registry, embedder)
        distractors = _pick_candidates(gold_card, state, step.goal_atom,
                                       ranked_cache[gold_id])
        candidates = [gold_card, *distractors]
        rng.shuffle(candidates)

        turns = 3 if long_flags[i] else 2
        images = 2 if image_flags[i] else 1
        sample_id = f"sel_{i + 1:06d}"
        dataset.samples.append({
            "sample_id": sample_id,
            "task": "selection",
            "env": fixture.env,
            "difficulty": fixture.difficulty,
            "instruction": fixture.instruction,
            "observation": {"current_rgb": step.observation},
            "history": _history_entries(fixture, step.index, turns, images),
            "state": sorted(state),
            "candidates": [card_to_json(c) for c in candidates],
        })
        dataset.golds.append({
            "sample_id": sample_id,
            "tool_id": gold_id,
            "goal_atom": step.goal_atom,
            "candidate_ids": [c.tool_id for c in candidates],
            "episode_id": fixture.episode_id,
            "step_index": step.index,
        })
    return dataset


# --------------------------------------------------------------------------
# task 3: execution

def _style_plan(pools: dict[str, list[StepRef]], quota: int,
                rng: random.Random, env: str) -> list[tuple[str, StepRef]]:
    """Fill an env quota preferring globally scarce styles first."""
    by_style: dict[str, list[StepRef]] = {s: [] for s in STYLES}
    for style, refs in pools.items():
        by_style[style] = list(refs)
    total = sum(len(v) for v in by_style.values())
    if quota > total:
        raise InsufficientFixtures(
            f"need {quota} execution steps in {env} but pool holds {total}"
        )
    order = sorted(STYLES, key=lambda s: (len(by_style[s]), s))
    picked: list[tuple[str, StepRef]] = []
    remaining = quota

    scarce = order[0]
    take = min(len(by_style[scarce]), remaining)
    picked.extend((scarce, ref) for ref in rng.sample(by_style[scarce], take))
    remaining -= take

    wheels = [s for s in order[1:] if by_style[s]]
    queues = {s: rng.sample(by_style[s], len(by_style[s])) for s in wheels}
    i = 0
    while remaining:
        live = [s for s in wheels if queues[s]]
        if not live:
            raise InsufficientFixtures(f"execution pool exhausted in {env}")
        style = live[i % len(live)]
        picked.append((style, queues[style].pop()))
        remaining -= 1
        i += 1
    return picked


def gen_execution(fixtures: list[TrajectoryFixture],
                  registry: RegistrySnapshot,
                  n: int = 100, seed: int = 0) -> Dataset:
    if n <= 0:
        raise GenerationError("n must be positive")
    rng = random.Random(("execution", seed).__repr__())
    pos = _steps_by_env(fixtures, want_tool=True)
    quotas = _env_quotas(n)

    engine = ExecutionEngine(registry)
    for tool_id, table in build_mock_tables(fixtures).items():
        engine.register_mock_executor(tool_id, table)

    picks: list[tuple[str, StepRef]] = []
    for env in ENVS:
        styled: dict[str, list[StepRef]] = {s: [] for s in STYLES}
        for ref in pos[env]:
            styled_key = format_style(ref[1].gold_call["tool_id"])
            styled[styled_key].append(ref)
        picks.extend(_style_plan(styled, quotas[env], rng, env))
    rng.shuffle(picks)

    one_turn = _count_profile(n, 0.35)
    short_flags = _flags(n, one_turn, [True] * n)
    heavy = _count_profile(n, 0.60)  # two-turn samples carrying two images
    heavy_flags = _flags(n, heavy, [not f for f in short_flags])

    dataset = Dataset("execution", seed)
    for i, (style, (fixture, step)) in enumerate(picks):
        tool_id = step.gold_call["tool_id"]
        arguments = step.gold_call["arguments"]
        record = engine.invoke(tool_id, arguments)
        if record.status != "completed":
            raise GoldInvalid(
                f"{fixture.episode_id} step {step.index}: gold call failed "
                f"({record.reason})"
            )
        turns = 1 if short_flags[i] else 2
        images = 2 if heavy_flags[i] else 1
        sample_id = f"exe_{i + 1:06d}"
        card = registry.get(tool_id)
        dataset.samples.append({
            "sample_id": sample_id,
            "task": "execution",
            "env": fixture.env,
            "difficulty": fixture.difficulty,
            "instruction": fixture.instruction,
            "observation": {"current_rgb": step.observation},
            "history": _history_entries(fixture, step.index, turns, images),
            "tool_card": card_to_json(card),
            "tool_output": record.output,
        })
        dataset.golds.append({
            "sample_id": sample_id,
            "tool_call": {"tool_id": tool_id, "arguments": arguments},
            "next_action": step.gold_action,
            "format_style": style,
            "tool_card": card_to_json(card),
            "episode_id": fixture.episode_id,
            "step_index": step.index,
        })
    return dataset


# --------------------------------------------------------------------------
# task 4: chain

def _chain_spec(chain, registry: RegistrySnapshot,
                pool: frozenset[str]) -> ChainSpec:
    cards = []
    for tool_id in chain.tools:
        card = registry.get(tool_id)
        if card is None:
            raise GenerationError(f"chain tool {tool_id} missing from registry")
        cards.append(card)
    constraints = derive_constraints(cards, chain.bindings)
    return ChainSpec(
        gold_set=frozenset(chain.tools),
        constraints=constraints,
        bindings=chain.bindings,
        candidate_pool=pool,
    )


def _bound_fields(chain, tool_id: str) -> tuple[set[str], set[str]]:
    inputs, outputs = set(), set()
    for binding in chain.bindings:
        if binding.consumer == tool_id:
            inputs.add(binding.input_field)
        if binding.producer == tool_id:
            outputs.add(binding.output_field)
    return inputs, outputs


def _object_fields(schema) -> set[str]:
    return set(schema.fields or {})


def _overlap_distractor(chain, registry: RegistrySnapshot) -> str:
    counts = {tid: 0 for tid in chain.tools}
    for binding in chain.bindings:
        counts[binding.producer] += 1
        counts[binding.consumer] += 1
    anchor_id = min(counts, key=lambda tid: (-counts[tid], tid))
    anchor = registry.get(anchor_id)
    need_in, need_out = _bound_fields(chain, anchor_id)
    gold = set(chain.tools)
    best: list[tuple[int, str]] = []
    for card in registry:
        if card.tool_id in gold:
            continue
        if card.capability.group != anchor.capability.group:
            continue
        has_in = need_in <= _object_fields(card.input_schema)
        has_out = need_out <= _object_fields(card.output_schema)
        if has_in and has_out:
            continue  # could substitute: not an overlap trap
        same_sub = card.capability.subcategory == anchor.capability.subcategory
        best.append((0 if same_sub else 1, card.tool_id))
    if not best:
        raise InsufficientDistractors(
            f"no overlapping distractor for chain anchored at {anchor_id}"
        )
    return min(best)[1]


def _redundancy_distractor(chain, registry: RegistrySnapshot,
                           taken: set[str]) -> str:
    closure = set(chain.initial_state)
    needed = {chain.goal_atom}
    for tool_id in chain.tools:
        card = registry.get(tool_id)
        closure |= card.effects.add
        needed |= card.preconditions.require
    for card in registry:
        if card.tool_id in chain.tools or card.tool_id in taken:
            continue
        if not card.preconditions.require <= closure:
            continue
        if card.preconditions.forbid & closure:
            continue
        if card.effects.add & needed:
            continue
        return card.tool_id
    raise InsufficientDistractors(
        f"no redundancy distractor for chain {chain.chain_id}"
    )


def gen_chain(fixtures: list[TrajectoryFixture],
              registry: RegistrySnapshot,
              n: int = 100, seed: int = 0) -> Dataset:
    if n <= 0:
        raise GenerationError("n must be positive")
    rng = random.Random(("chain", seed).__repr__())
    quotas = _env_quotas(n)

    chains_by_env: dict[str, list[tuple[TrajectoryFixture, Any]]] = {
        env: [] for env in ENVS
    }
    for fixture in fixtures:
        if fixture.env not in chains_by_env:
            continue
        for chain in fixture.chains:
            chains_by_env[fixture.env].append((fixture, chain))
    for pool in chains_by_env.values():
        pool.sort(key=lambda ref: ref[1].chain_id)

    picks: list[tuple[TrajectoryFixture, Any]] = []
    for env in ENVS:
        pool = chains_by_env[env]
        if quotas[env] > len(pool):
            raise InsufficientFixtures(
                f"need {quotas[env]} chains in {env} but pool holds {len(pool)}"
            )
        picks.extend(rng.sample(pool, quotas[env]))
    rng.shuffle(picks)

    target_noncanon = round(0.2 * n)
    specs: list[ChainSpec] = []
    pools: list[list[str]] = []
    for fixture, chain in picks:
        taken: set[str] = set()
        overlap = _overlap_distractor(chain, registry)
        taken.add(overlap)
        redundant = _redundancy_distractor(chain, registry, taken)
        taken.add(redundant)
        others = [c.tool_id for c in registry
                  if c.tool_id not in taken and c.tool_id not in chain.tools]
        fill = rng.sample(sorted(others), max(0, POOL_SIZE - len(chain.tools) - 2))
        pool = sorted({*chain.tools, overlap, redundant, *fill})
        spec = _chain_spec(chain, registry, frozenset(pool))
        specs.append(spec)
        pools.append(pool)

    # non-canonical gold orders can only come from chains with >=2 valid orders
    flexible = []
    for i, spec in enumerate(specs):
        base = plan_order(spec, seed=rng.randrange(2 ** 31))
        _, changed = perturb_noncanonical(base, spec, seed=0)
        flexible.append(changed)
    if sum(flexible) < target_noncanon:
        raise InsufficientFixtures(
            f"only {sum(flexible)} chains admit alternate orders; "
            f"need {target_noncanon}"
        )
    noncanon_flags = _flags(n, target_noncanon, flexible)

    two_turns = _count_profile(n, 0.06)
    two_images = _count_profile(n, 0.44)
    turn_flags = _flags(n, two_turns, [True] * n)
    image_flags = _flags(n, two_images, [True] * n)

    dataset = Dataset("chain", seed)
    for i, (fixture, chain) in enumerate(picks):
        spec = specs[i]
        base = plan_order(spec, seed=rng.randrange(2 ** 31))
        if noncanon_flags[i]:
            sequence, changed = perturb_noncanonical(base, spec,
                                                     seed=rng.randrange(2 ** 31))
            if not changed:
                raise GenerationError(f"{chain.chain_id}: expected alternate order")
        else:
            sequence = base
        turns = 2 if turn_flags[i] else 1
        images = 2 if image_flags[i] else 1
        start = chain.start_index
        history = _history_entries(fixture, start, turns, 0)
        rgb = [s.observation for s in fixture.steps[max(0, start - images):start]]
        sample_id = f"chn_{i + 1:06d}"
        dataset.samples.append({
            "sample_id": sample_id,
            "task": "chain",
            "env": fixture.env,
            "difficulty": fixture.difficulty,
            "instruction": fixture.instruction,
            "observation": {
                "current_rgb": fixture.steps[start].observation,
                "history_rgb": rgb,
            },
            "history": history,
            "initial_state": sorted(chain.initial_state),
            "goal_atom": chain.goal_atom,
            "candidates": pools[i],
        })
        dataset.golds.append({
            "sample_id": sample_id,
            "tool_sequence": list(sequence),
            "non_canonical": bool(noncanon_flags[i]),
            "chain": spec.to_json(),
            "episode_id": fixture.episode_id,
            "chain_id": chain.chain_id,
        })
    return dataset


# --------------------------------------------------------------------------

_GENERATORS: dict[str, Callable[..., Dataset]] = {
    "need_recognition": gen_need_recognition,
    "selection": gen_selection,
    "execution": gen_execution,
    "chain": gen_chain,
}


def generate(task: str, fixtures: list[TrajectoryFixture],
             registry: RegistrySnapshot, n: int = 100, seed: int = 0) -> Dataset:
    if task not in _GENERATORS:
        raise GenerationError(f"unknown task {task!r}; expected one of {TASKS}")
    return _GENERATORS[task](fixtures, registry, n=n, seed=seed)


def write_dataset(dataset: Dataset, out_path: str | Path) -> tuple[Path, Path]:
    out_path = Path(out_path)
    if out_path.suffix == ".jsonl":
        gold_path = out_path.with_suffix(".gold.jsonl")
    else:
        gold_path = out_path.with_name(out_path.name + ".gold.jsonl")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for sample in dataset.samples:
            fh.write(canonical_dumps(sample) + "\n")
    with gold_path.open("w", encoding="utf-8") as fh:
        for gold in dataset.golds:
            fh.write(canonical_dumps(gold) + "\n")
    return out_path, gold_path


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    import json

    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def _history_stats(samples: list[dict[str, Any]]) -> tuple[float, float]:
    if not samples:
        return 0.0, 0.0
    turns = 0
    images = 0
    for sample in samples:
        history = sample.get("history", [])
        turns += len(history)
        images += sum(1 for h in history if "image_path" in h)
        images += len(sample.get("observation", {}).get("history_rgb", []))
    return turns / len(samples), images / len(samples)


def dataset_report(samples: list[dict[str, Any]],
                   golds: list[dict[str, Any]]) -> dict[str, Any]:
    if not samples:
        raise GenerationError("empty dataset")
    by_id = {g["sample_id"]: g for g in golds}
    task = samples[0].get("task", "unknown")
    envs: dict[str, int] = {}
    difficulty: dict[str, int] = {}
    for sample in samples:
        envs[sample["env"]] = envs.get(sample["env"], 0) + 1
        difficulty[sample["difficulty"]] = difficulty.get(sample["difficulty"], 0) + 1
    avg_turns, avg_images = _history_stats(samples)
    report: dict[str, Any] = {
        "task": task,
        "n": len(samples),
        "envs": dict(sorted(envs.items())),
        "difficulty": dict(sorted(difficulty.items())),
        "avg_history_turns": round(avg_turns, 4),
        "avg_history_images": round(avg_images, 4),
    }
    if task == "need_recognition":
        pos = sum(1 for g in golds if g.get("needs_tool"))
        inducing = sum(1 for g in golds if g.get("tool_inducing"))
        report["positives"] = pos
        report["negatives"] = len(golds) - pos
        report["tool_inducing_negatives"] = inducing
    elif task == "selection":
        coverage = set()
        for sample in samples:
            for card in sample.get("candidates", []):
                coverage.add(card["tool_id"])
        report["candidate_tool_coverage"] = len(coverage)
        report["candidates_per_sample"] = (
            sum(len(s.get("candidates", [])) for s in samples) / len(samples)
        )
    elif task == "execution":
        styles: dict[str, int] = {}
        for gold in golds:
            style = gold.get("format_style", "unknown")
            styles[style] = styles.get(style, 0) + 1
        report["format_styles"] = dict(sorted(styles.items()))
        report["designated_tools"] = len(
            {g["tool_call"]["tool_id"] for g in golds if "tool_call" in g}
        )
    elif task == "chain":
        coverage = set()
        lengths = 0
        noncanon = 0
        for sample in samples:
            coverage.update(sample.get("candidates", []))
            gold = by_id.get(sample["sample_id"], {})
            lengths += len(gold.get("tool_sequence", []))
            noncanon += 1 if gold.get("non_canonical") else 0
        report["candidate_tool_coverage"] = len(coverage)
        report["avg_gold_tools"] = lengths / len(samples)
        report["non_canonical"] = noncanon
        report["non_canonical_fraction"] = round(noncanon / len(samples), 4)
    return report
