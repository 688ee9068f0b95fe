"""Benchmark dataset generation: structure, balance, and determinism."""

from __future__ import annotations

import math
from collections import Counter

import pytest

from etp.canonical import canonical_dumps
from etp.benchgen import (
    GenerationError,
    InsufficientFixtures,
    POOL_SIZE,
    TASKS,
    dataset_report,
    format_style,
    generate,
    read_jsonl,
    write_dataset,
)
from etp.cards import apply_effects, preconditions_satisfied
from etp.fixtures import (
    load_fixture_dir,
    load_packaged_registry,
    packaged_trajectory_dir,
)
from etp.toolchain import ChainSpec


@pytest.fixture(scope="module")
def fixtures():
    return load_fixture_dir(packaged_trajectory_dir())


@pytest.fixture(scope="module")
def registry():
    return load_packaged_registry().snapshot()


def test_generate_rejects_unknown_task(fixtures, registry):
    with pytest.raises(GenerationError):
        generate("trivia", fixtures, registry)


def test_generate_raises_when_fixtures_cannot_cover(fixtures, registry):
    with pytest.raises(InsufficientFixtures):
        generate("need_recognition", fixtures, registry, n=5000, seed=0)
    with pytest.raises(InsufficientFixtures):
        generate("chain", fixtures, registry, n=400, seed=0)


@pytest.mark.parametrize("task", TASKS)
def test_generation_is_seed_deterministic(task, fixtures, registry):
    a = generate(task, fixtures, registry, n=24, seed=11)
    b = generate(task, fixtures, registry, n=24, seed=11)
    assert canonical_dumps(a.samples) == canonical_dumps(b.samples)
    assert canonical_dumps(a.golds) == canonical_dumps(b.golds)
    c = generate(task, fixtures, registry, n=24, seed=12)
    assert canonical_dumps(a.samples) != canonical_dumps(c.samples)


@pytest.mark.parametrize("task", TASKS)
def test_sample_ids_unique_and_aligned(task, fixtures, registry):
    ds = generate(task, fixtures, registry, n=20, seed=3)
    sample_ids = [s["sample_id"] for s in ds.samples]
    gold_ids = [g["sample_id"] for g in ds.golds]
    assert sample_ids == gold_ids
    assert len(set(sample_ids)) == len(sample_ids) == 20
    envs = {s["env"] for s in ds.samples}
    assert envs <= {"alfred", "habitat", "manipulation", "navigation"}


def test_need_recognition_balance(fixtures, registry):
    for n in (40, 100):
        ds = generate("need_recognition", fixtures, registry, n=n, seed=7)
        golds = ds.golds
        positives = sum(1 for g in golds if g["needs_tool"])
        negatives = n - positives
        assert positives == (n + 1) // 2
        inducing = sum(1 for g in golds if not g["needs_tool"] and g["tool_inducing"])
        assert inducing == math.ceil(0.3 * negatives)
        for gold in golds:
            if gold["needs_tool"]:
                assert gold["negative_kind"] is None
            else:
                assert gold["negative_kind"] in ("direct", "tool_redundant")


def test_need_recognition_samples_carry_feedback_not_labels(fixtures, registry):
    ds = generate("need_recognition", fixtures, registry, n=30, seed=5)
    for sample in ds.samples:
        assert "env_feedback" in sample
        assert "last_action_success" in sample
        assert "needs_tool" not in sample  # labels live in the gold file only


def test_selection_candidates(fixtures, registry):
    ds = generate("selection", fixtures, registry, n=40, seed=7)
    for sample, gold in zip(ds.samples, ds.golds):
        # Samples carry the full cards; golds carry just the ids.
        candidate_ids = [card["tool_id"] for card in sample["candidates"]]
        assert len(candidate_ids) == 4
        assert len(set(candidate_ids)) == 4
        assert gold["tool_id"] in candidate_ids
        assert gold["candidate_ids"] == candidate_ids


def test_selection_gold_uniquely_usable(fixtures, registry):
    """Among each sample's candidates exactly one tool both fires under the
    sample state and adds the goal atom."""
    ds = generate("selection", fixtures, registry, n=40, seed=7)
    for sample, gold in zip(ds.samples, ds.golds):
        state = frozenset(sample["state"])
        goal = gold["goal_atom"]
        usable = [
            card["tool_id"]
            for card in sample["candidates"]
            if preconditions_satisfied(registry.get(card["tool_id"]).preconditions, state)
            and goal in registry.get(card["tool_id"]).effects.add
        ]
        assert usable == [gold["tool_id"]], sample["sample_id"]


def test_execution_outputs_come_from_real_invocations(fixtures, registry):
    ds = generate("execution", fixtures, registry, n=30, seed=7)
    for sample, gold in zip(ds.samples, ds.golds):
        assert sample["tool_card"]["tool_id"] == gold["tool_call"]["tool_id"]
        assert sample["tool_output"] is not None
        assert gold["format_style"] == format_style(gold["tool_call"]["tool_id"])
        assert gold["next_action"]["action_type"]
        # Scoring-side card copy matches the sample card.
        assert gold["tool_card"] == sample["tool_card"]


def test_execution_style_mix_counts(fixtures, registry):
    ds = generate("execution", fixtures, registry, n=100, seed=7)
    styles = Counter(g["format_style"] for g in ds.golds)
    assert set(styles) == {"natural", "numerical", "structured"}
    assert min(styles.values()) >= 20  # no style starves


def test_chain_pools_and_specs(fixtures, registry):
    ds = generate("chain", fixtures, registry, n=40, seed=7)
    non_canonical = 0
    for sample, gold in zip(ds.samples, ds.golds):
        pool = sample["candidates"]
        assert len(pool) == POOL_SIZE
        assert len(set(pool)) == POOL_SIZE
        spec = ChainSpec.from_json(gold["chain"])
        assert set(spec.gold_set) <= set(pool)
        sequence = gold["tool_sequence"]
        assert sorted(sequence) == sorted(spec.gold_set)
        pos = {t: i for i, t in enumerate(sequence)}
        for c in spec.constraints:
            assert pos[c.before] < pos[c.after], sample["sample_id"]
        non_canonical += bool(gold["non_canonical"])
        # Replaying the episode state through the gold sequence works.
        state = frozenset(sample["initial_state"])
        for tool_id in sequence:
            card = registry.get(tool_id)
            assert preconditions_satisfied(card.preconditions, state)
            state = apply_effects(state, card.effects)
        assert sample["goal_atom"] in state
    assert 1 <= non_canonical <= 15


def test_chain_non_canonical_fraction_at_n100(fixtures, registry):
    ds = generate("chain", fixtures, registry, n=100, seed=7)
    share = sum(1 for g in ds.golds if g["non_canonical"]) / 100
    assert 0.15 <= share <= 0.25


def test_history_profiles_reported(fixtures, registry):
    ds = generate("need_recognition", fixtures, registry, n=100, seed=7)
    report = dataset_report(ds.samples, ds.golds)
    assert report["n"] == 100
    assert report["avg_history_turns"] == pytest.approx(2.02)
    assert report["avg_history_images"] == pytest.approx(2.02)
    assert report["positives"] == 50
    assert report["tool_inducing_negatives"] == 15


def test_dataset_report_per_task_sections(fixtures, registry):
    snap = registry
    sel = generate("selection", fixtures, snap, n=24, seed=7)
    report = dataset_report(sel.samples, sel.golds)
    assert report["candidates_per_sample"] == 4.0
    assert report["candidate_tool_coverage"] >= 4
    exe = generate("execution", fixtures, snap, n=24, seed=7)
    report = dataset_report(exe.samples, exe.golds)
    assert set(report["format_styles"]) <= {"natural", "numerical", "structured"}
    chain = generate("chain", fixtures, snap, n=24, seed=7)
    report = dataset_report(chain.samples, chain.golds)
    assert report["non_canonical"] == round(24 * report["non_canonical_fraction"])
    assert 0 <= report["non_canonical_fraction"] <= 1
    assert report["avg_gold_tools"] > 1


def test_write_dataset_paths_and_round_trip(tmp_path, fixtures, registry):
    ds = generate("need_recognition", fixtures, registry, n=10, seed=1)
    out, gold = write_dataset(ds, tmp_path / "t1.jsonl")
    assert out.name == "t1.jsonl"
    assert gold.name == "t1.gold.jsonl"
    assert read_jsonl(out) == ds.samples
    assert read_jsonl(gold) == ds.golds
    out2, gold2 = write_dataset(ds, tmp_path / "plain")
    assert gold2.name == "plain.gold.jsonl"
    # Same seed, same bytes.
    ds2 = generate("need_recognition", fixtures, registry, n=10, seed=1)
    out3, _ = write_dataset(ds2, tmp_path / "again.jsonl")
    assert out.read_bytes() == out3.read_bytes()


def test_dataset_report_rejects_empty():
    with pytest.raises(GenerationError):
        dataset_report([], [])
