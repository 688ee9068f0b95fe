"""Chain constraint derivation, planning, and perturbation."""

from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etp.cards import parse_card
from etp.toolchain import (
    Binding,
    ChainError,
    ChainSpec,
    CyclicConstraints,
    OrderingConstraint,
    UnknownField,
    UnknownTool,
    derive_constraints,
    perturb_noncanonical,
    plan_order,
    validate_chain,
)

from .oracles import gen_chain_samples, random_chain_spec
from .test_cards import base_card


def chain_card(tool_id, *, out_fields=("result",), in_fields=("query",), add=(), require=()):
    doc = base_card()
    doc["tool_id"] = tool_id
    doc["input_schema"] = {
        "kind": "object",
        "fields": {f: {"kind": "string"} for f in in_fields},
        "required": list(in_fields),
    }
    doc["output_schema"] = {
        "kind": "object",
        "fields": {f: {"kind": "string"} for f in out_fields},
        "required": list(out_fields),
    }
    doc["preconditions"] = {"require": list(require), "forbid": []}
    doc["effects"] = {"add": list(add), "delete": []}
    return parse_card(doc)


# --- derivation ---------------------------------------------------------------


def test_data_constraints_from_bindings():
    det = chain_card("tool_det", out_fields=("target_ref",))
    grasp = chain_card("tool_grasp", in_fields=("target_ref",))
    constraints = derive_constraints(
        [det, grasp], [Binding("tool_det", "target_ref", "tool_grasp", "target_ref")]
    )
    assert constraints == (
        OrderingConstraint("tool_det", "tool_grasp", "data", "target_ref->target_ref"),
    )


def test_state_constraints_from_atoms():
    det = chain_card("tool_det", add=("target_localized",))
    grasp = chain_card("tool_grasp", require=("target_localized",))
    constraints = derive_constraints([det, grasp])
    assert constraints == (
        OrderingConstraint("tool_det", "tool_grasp", "state", "target_localized"),
    )


def test_state_evidence_is_lexicographically_first_shared_atom():
    a = chain_card("tool_a", add=("beta", "alpha"))
    b = chain_card("tool_b", require=("alpha", "beta"))
    (constraint,) = derive_constraints([a, b])
    assert constraint.evidence == "alpha"


def test_derivation_deduplicates_and_orders():
    det = chain_card("tool_det", out_fields=("ref",), add=("seen",))
    grasp = chain_card("tool_grasp", in_fields=("ref",), require=("seen",))
    constraints = derive_constraints(
        [det, grasp],
        [
            Binding("tool_det", "ref", "tool_grasp", "ref"),
            Binding("tool_det", "ref", "tool_grasp", "ref"),  # duplicate collapses
        ],
    )
    # data constraints sort ahead of state constraints
    assert [c.kind for c in constraints] == ["data", "state"]
    assert len(constraints) == 2


def test_derivation_is_input_order_independent():
    cards = [
        chain_card("tool_a", add=("x",)),
        chain_card("tool_b", require=("x",), add=("y",)),
        chain_card("tool_c", require=("y",)),
    ]
    forward = derive_constraints(cards)
    backward = derive_constraints(list(reversed(cards)))
    assert forward == backward


def test_derivation_errors():
    det = chain_card("tool_det", out_fields=("ref",))
    grasp = chain_card("tool_grasp", in_fields=("ref",))
    with pytest.raises(UnknownTool):
        derive_constraints([det], [Binding("tool_det", "ref", "tool_grasp", "ref")])
    with pytest.raises(UnknownField):
        derive_constraints([det, grasp], [Binding("tool_det", "nope", "tool_grasp", "ref")])
    with pytest.raises(UnknownField):
        derive_constraints([det, grasp], [Binding("tool_det", "ref", "tool_grasp", "nope")])
    with pytest.raises(ChainError):
        derive_constraints([det], [Binding("tool_det", "ref", "tool_det", "query")])


def test_constraint_endpoint_rules():
    with pytest.raises(ChainError):
        OrderingConstraint("tool_a", "tool_a", "data")
    with pytest.raises(ChainError):
        OrderingConstraint("tool_a", "tool_b", "psychic")


def test_spec_validation():
    with pytest.raises(ChainError):
        ChainSpec(
            gold_set=frozenset({"a"}),
            constraints=(OrderingConstraint("a", "b", "declared"),),
        )
    with pytest.raises(ChainError):
        ChainSpec(
            gold_set=frozenset({"a", "b"}),
            constraints=(),
            candidate_pool=frozenset({"a"}),
        )
    with pytest.raises(CyclicConstraints):
        ChainSpec(
            gold_set=frozenset({"a", "b"}),
            constraints=(
                OrderingConstraint("a", "b", "declared"),
                OrderingConstraint("b", "a", "declared"),
            ),
        )


def test_spec_json_round_trip():
    spec = random_chain_spec(random.Random(5))
    assert ChainSpec.from_json(spec.to_json()) == spec


# --- validation ---------------------------------------------------------------


def test_validate_chain_first_occurrence_positions():
    spec = ChainSpec(
        gold_set=frozenset({"a", "b"}),
        constraints=(OrderingConstraint("a", "b", "declared"),),
    )
    # The later duplicate "a" does not move its position past "b".
    report = validate_chain(["a", "b", "a"], spec)
    assert report.satisfied == (True,)
    assert report.set_exact
    report = validate_chain(["b", "a"], spec)
    assert report.satisfied == (False,)


def test_validate_chain_extras_missing():
    spec = ChainSpec(gold_set=frozenset({"a", "b"}), constraints=())
    report = validate_chain(["a", "z"], spec)
    assert report.extras == ("z",)
    assert report.missing == ("b",)
    assert not report.set_exact


def test_order_ratio_empty_constraints_is_zero():
    # Zero-denominator ratios report 0; the scoring layer raises before
    # reaching this, so the raw property just follows the shared convention.
    spec = ChainSpec(gold_set=frozenset({"a"}), constraints=())
    assert validate_chain(["a"], spec).order_ratio == 0.0


# --- planning -----------------------------------------------------------------


def _valid(order, spec):
    pos = {t: i for i, t in enumerate(order)}
    return all(pos[c.before] < pos[c.after] for c in spec.constraints)


def test_plan_order_is_valid_and_seed_stable():
    rng = random.Random(99)
    for _ in range(50):
        spec = random_chain_spec(rng)
        for seed in (0, 1, 7):
            order = plan_order(spec, seed)
            assert sorted(order) == sorted(spec.gold_set)
            assert _valid(order, spec)
            assert order == plan_order(spec, seed)


def test_plan_order_seed_varies_free_orderings():
    # No constraints between b and c, so some seed must flip them.
    spec = ChainSpec(
        gold_set=frozenset({"a", "b", "c"}),
        constraints=(OrderingConstraint("a", "b", "declared"),),
    )
    orders = {tuple(plan_order(spec, seed)) for seed in range(30)}
    assert len(orders) > 1


def test_plan_order_cycle_detection():
    spec = ChainSpec(
        gold_set=frozenset({"a", "b"}),
        constraints=(OrderingConstraint("a", "b", "declared"),),
    )
    bad = (
        OrderingConstraint("a", "b", "declared"),
        OrderingConstraint("b", "a", "declared"),
    )
    with pytest.raises(CyclicConstraints):
        plan_order(
            ChainSpec.__new__(ChainSpec),  # not constructible; go through _toposort path
            0,
        ) if False else _raise_cycle(spec, bad)


def _raise_cycle(spec, bad):
    from etp.toolchain import _toposort

    _toposort(sorted(spec.gold_set), bad)


# --- perturbation ---------------------------------------------------------------


def test_perturb_returns_different_valid_order():
    spec = ChainSpec(
        gold_set=frozenset({"a", "b", "c"}),
        constraints=(OrderingConstraint("a", "b", "declared"),),
    )
    base = plan_order(spec, 0)
    for seed in range(10):
        perturbed, changed = perturb_noncanonical(base, spec, seed)
        assert changed
        assert perturbed != base
        assert _valid(perturbed, spec)


def test_perturb_single_valid_order_reports_unchanged():
    spec = ChainSpec(
        gold_set=frozenset({"a", "b", "c"}),
        constraints=(
            OrderingConstraint("a", "b", "declared"),
            OrderingConstraint("b", "c", "declared"),
        ),
    )
    base = ["a", "b", "c"]
    perturbed, changed = perturb_noncanonical(base, spec, 3)
    assert not changed
    assert perturbed == base


def test_perturb_exhaustive_small_chains():
    """For n <= 7 the alternative set is enumerated, so every valid
    alternative is reachable across seeds."""
    spec = ChainSpec(
        gold_set=frozenset({"a", "b", "c"}),
        constraints=(OrderingConstraint("a", "c", "declared"),),
    )
    base = ["a", "b", "c"]
    want = {
        tuple(p)
        for p in itertools.permutations(["a", "b", "c"])
        if _valid(p, spec) and list(p) != base
    }
    got = {tuple(perturb_noncanonical(base, spec, seed)[0]) for seed in range(200)}
    assert got == want


def test_perturb_rejects_bad_inputs():
    spec = ChainSpec(
        gold_set=frozenset({"a", "b"}),
        constraints=(OrderingConstraint("a", "b", "declared"),),
    )
    with pytest.raises(ChainError):
        perturb_noncanonical(["a"], spec, 0)
    with pytest.raises(ChainError):
        perturb_noncanonical(["b", "a"], spec, 0)


def test_perturb_large_chain_reseeded_replanning():
    tools = [f"tool_{i:02d}" for i in range(9)]
    constraints = tuple(
        OrderingConstraint(tools[i], tools[i + 1], "declared") for i in range(4)
    )
    spec = ChainSpec(gold_set=frozenset(tools), constraints=constraints)
    base = plan_order(spec, 0)
    perturbed, changed = perturb_noncanonical(base, spec, 1)
    assert changed
    assert perturbed != base
    assert _valid(perturbed, spec)
    # Determinism: same seed, same answer.
    assert perturb_noncanonical(base, spec, 1)[0] == perturbed


# --- property tests -------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_plan_order_property(spec_seed, plan_seed):
    spec = random_chain_spec(random.Random(spec_seed))
    order = plan_order(spec, plan_seed)
    assert sorted(order) == sorted(spec.gold_set)
    assert _valid(order, spec)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_perturb_property(spec_seed, perturb_seed):
    spec = random_chain_spec(random.Random(spec_seed))
    base = plan_order(spec, 0)
    perturbed, changed = perturb_noncanonical(base, spec, perturb_seed)
    assert _valid(perturbed, spec)
    assert sorted(perturbed) == sorted(base)
    if changed:
        assert perturbed != base
    else:
        assert perturbed == base


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_validate_chain_agrees_with_bruteforce(seed):
    rng = random.Random(seed)
    samples = gen_chain_samples(rng, 5)
    for predicted, spec in samples:
        report = validate_chain(predicted, spec)
        pos = {}
        for i, t in enumerate(predicted):
            if t not in pos:
                pos[t] = i
        for constraint, ok in zip(spec.constraints, report.satisfied):
            expect = (
                constraint.before in pos
                and constraint.after in pos
                and pos[constraint.before] < pos[constraint.after]
            )
            assert ok == expect
