"""Tool chains: ordering constraints, chain validation, and order planning.

Two dependency sources are kept distinct and never collapsed into one check:
data dependencies (an output field of one tool feeds an input field of
another) and state dependencies (one tool's added atom is required by
another). Declared constraints may be authored directly.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .cards import SchemaNode, ToolCard

__all__ = [
    "ChainError",
    "UnknownTool",
    "UnknownField",
    "CyclicConstraints",
    "ConstraintKind",
    "OrderingConstraint",
    "Binding",
    "ChainSpec",
    "ChainReport",
    "derive_constraints",
    "validate_chain",
    "plan_order",
    "perturb_noncanonical",
]


class ChainError(Exception):
    """Base class for chain errors."""


class UnknownTool(ChainError):
    """A binding or constraint references a tool outside the given cards."""


class UnknownField(ChainError):
    """A binding references a schema field the card does not declare."""


class CyclicConstraints(ChainError):
    """No ordering satisfies the constraint set."""


# Constraint kinds, in the order used for deterministic sorting.
DATA = "data"
STATE = "state"
DECLARED = "declared"
ConstraintKind = str
_KIND_ORDER = {DATA: 0, STATE: 1, DECLARED: 2}


@dataclass(frozen=True, order=False)
class OrderingConstraint:
    """``before`` must appear before ``after`` in a valid chain."""

    before: str
    after: str
    kind: ConstraintKind
    evidence: str | None = None

    def __post_init__(self) -> None:
        if self.before == self.after:
            raise ChainError(f"constraint endpoints must differ: {self.before}")
        if self.kind not in _KIND_ORDER:
            raise ChainError(f"unknown constraint kind: {self.kind}")

    def sort_key(self) -> tuple:
        return (_KIND_ORDER[self.kind], self.before, self.after, self.evidence or "")

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"before": self.before, "after": self.after, "kind": self.kind}
        if self.evidence is not None:
            out["evidence"] = self.evidence
        return out

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "OrderingConstraint":
        return OrderingConstraint(
            before=obj["before"],
            after=obj["after"],
            kind=obj["kind"],
            evidence=obj.get("evidence"),
        )


@dataclass(frozen=True)
class Binding:
    """Field-level data flow: producer.output_field feeds consumer.input_field."""

    producer: str
    output_field: str
    consumer: str
    input_field: str

    def to_json(self) -> dict[str, str]:
        return {
            "producer": self.producer,
            "output_field": self.output_field,
            "consumer": self.consumer,
            "input_field": self.input_field,
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "Binding":
        return Binding(
            producer=obj["producer"],
            output_field=obj["output_field"],
            consumer=obj["consumer"],
            input_field=obj["input_field"],
        )


@dataclass(frozen=True)
class ChainSpec:
    """Gold chain definition over a candidate pool.

    gold_set is a subset of candidate_pool; every constraint endpoint lies in
    gold_set; the constraint graph restricted to gold_set is acyclic.
    """

    gold_set: frozenset[str]
    constraints: tuple[OrderingConstraint, ...]
    bindings: tuple[Binding, ...] = ()
    candidate_pool: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        pool = self.candidate_pool or self.gold_set
        if not self.gold_set <= pool:
            raise ChainError("gold_set must be a subset of candidate_pool")
        for c in self.constraints:
            if c.before not in self.gold_set or c.after not in self.gold_set:
                raise ChainError(f"constraint endpoint outside gold_set: {c.before}->{c.after}")
        # Cycle check up front so later calls can assume sortability.
        _toposort(sorted(self.gold_set), self.constraints)

    def to_json(self) -> dict[str, Any]:
        return {
            "gold_set": sorted(self.gold_set),
            "constraints": [c.to_json() for c in self.constraints],
            "bindings": [b.to_json() for b in self.bindings],
            "candidate_pool": sorted(self.candidate_pool or self.gold_set),
        }

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "ChainSpec":
        return ChainSpec(
            gold_set=frozenset(obj["gold_set"]),
            constraints=tuple(OrderingConstraint.from_json(c) for c in obj["constraints"]),
            bindings=tuple(Binding.from_json(b) for b in obj.get("bindings", [])),
            candidate_pool=frozenset(obj.get("candidate_pool", obj["gold_set"])),
        )


@dataclass(frozen=True)
class ChainReport:
    """validate_chain result: set agreement plus per-constraint satisfaction."""

    set_exact: bool
    satisfied: tuple[bool, ...]
    extras: tuple[str, ...]
    missing: tuple[str, ...]

    @property
    def all_satisfied(self) -> bool:
        return all(self.satisfied)

    @property
    def order_ratio(self) -> float:
        return sum(self.satisfied) / len(self.satisfied) if self.satisfied else 0.0

    def to_json(self) -> dict[str, Any]:
        return {
            "set_exact": self.set_exact,
            "satisfied": list(self.satisfied),
            "extras": list(self.extras),
            "missing": list(self.missing),
        }


def _object_fields(schema: SchemaNode) -> set[str]:
    if schema.kind != "object" or not schema.fields:
        return set()
    return set(schema.fields)


def derive_constraints(
    cards: Iterable[ToolCard],
    bindings: Sequence[Binding] = (),
) -> tuple[OrderingConstraint, ...]:
    """Derive data constraints from bindings and state constraints from atoms.

    One data constraint per binding pair; one state constraint per
    (producer, consumer) pair whose added atoms intersect required atoms,
    with the lexicographically first shared atom as evidence. The result is
    deduplicated and deterministically ordered.

    Raises UnknownTool when a binding references a missing card and
    UnknownField when a binding names an undeclared schema field.
    """
    by_id = {card.tool_id: card for card in cards}
    found: set[OrderingConstraint] = set()

    for b in bindings:
        for endpoint in (b.producer, b.consumer):
            if endpoint not in by_id:
                raise UnknownTool(f"binding references unknown tool: {endpoint}")
        if b.producer == b.consumer:
            raise ChainError(f"binding endpoints must differ: {b.producer}")
        if b.output_field not in _object_fields(by_id[b.producer].output_schema):
            raise UnknownField(f"{b.producer} has no output field {b.output_field!r}")
        if b.input_field not in _object_fields(by_id[b.consumer].input_schema):
            raise UnknownField(f"{b.consumer} has no input field {b.input_field!r}")
        found.add(
            OrderingConstraint(
                before=b.producer,
                after=b.consumer,
                kind=DATA,
                evidence=f"{b.output_field}->{b.input_field}",
            )
        )

    ids = sorted(by_id)
    for a in ids:
        for b2 in ids:
            if a == b2:
                continue
            shared = by_id[a].effects.add & by_id[b2].preconditions.require
            if shared:
                found.add(
                    OrderingConstraint(before=a, after=b2, kind=STATE, evidence=min(shared))
                )

    return tuple(sorted(found, key=OrderingConstraint.sort_key))


def validate_chain(predicted: Sequence[str], spec: ChainSpec) -> ChainReport:
    """Check a predicted tool sequence against a chain spec.

    Positions use the first occurrence of each tool; a constraint with an
    absent endpoint counts as unsatisfied. extras/missing compare the
    deduplicated predicted set with the gold set.
    """
    pos: dict[str, int] = {}
    for i, tool_id in enumerate(predicted):
        pos.setdefault(tool_id, i)
    predicted_set = set(pos)
    satisfied = tuple(
        c.before in pos and c.after in pos and pos[c.before] < pos[c.after]
        for c in spec.constraints
    )
    return ChainReport(
        set_exact=predicted_set == set(spec.gold_set),
        satisfied=satisfied,
        extras=tuple(sorted(predicted_set - spec.gold_set)),
        missing=tuple(sorted(spec.gold_set - predicted_set)),
    )


def _toposort(order_hint: Sequence[str], constraints: Sequence[OrderingConstraint]) -> list[str]:
    """Kahn's algorithm with ties broken by position in order_hint.

    Raises CyclicConstraints when the constraint graph has a cycle.
    """
    nodes = list(order_hint)
    rank = {n: i for i, n in enumerate(nodes)}
    succ: dict[str, set[str]] = {n: set() for n in nodes}
    indeg: dict[str, int] = {n: 0 for n in nodes}
    for c in constraints:
        if c.after not in succ[c.before]:
            succ[c.before].add(c.after)
            indeg[c.after] += 1
    ready = sorted((n for n in nodes if indeg[n] == 0), key=rank.__getitem__)
    out: list[str] = []
    while ready:
        n = ready.pop(0)
        out.append(n)
        for m in sorted(succ[n], key=rank.__getitem__):
            indeg[m] -= 1
            if indeg[m] == 0:
                # Insert keeping ready sorted by hint rank; lists are tiny.
                ready.append(m)
                ready.sort(key=rank.__getitem__)
    if len(out) != len(nodes):
        raise CyclicConstraints("constraint graph has a cycle")
    return out


def plan_order(spec: ChainSpec, seed: int) -> list[str]:
    """A constraint-satisfying permutation of gold_set, seeded and stable.

    The gold set is shuffled with the seed, then topologically sorted with
    ties broken by the shuffled order, so the same seed always yields the
    same plan.
    """
    nodes = sorted(spec.gold_set)
    random.Random(seed).shuffle(nodes)
    return _toposort(nodes, spec.constraints)


_ENUMERATION_LIMIT = 7


def perturb_noncanonical(order: Sequence[str], spec: ChainSpec, seed: int) -> tuple[list[str], bool]:
    """A different constraint-valid permutation when one exists.

    Returns (permutation, changed). When the constraints admit only one
    order the input comes back unchanged with changed=False. For small
    chains the alternatives are enumerated exhaustively; larger chains fall
    back to seeded re-planning.
    """
    base = list(order)
    if set(base) != set(spec.gold_set):
        raise ChainError("order must be a permutation of gold_set")

    def valid(candidate: Sequence[str]) -> bool:
        pos = {t: i for i, t in enumerate(candidate)}
        return all(pos[c.before] < pos[c.after] for c in spec.constraints)

    if not valid(base):
        raise ChainError("input order violates the constraint set")

    rng = random.Random(seed)
    if len(base) <= _ENUMERATION_LIMIT:
        alternatives = [list(p) for p in itertools.permutations(sorted(base)) if list(p) != base and valid(p)]
        if not alternatives:
            return base, False
        return alternatives[rng.randrange(len(alternatives))], True

    for _ in range(64):
        candidate = plan_order(spec, rng.randrange(2**32))
        if candidate != base:
            return candidate, True
    return base, False
