"""Tool cards: capability descriptors, I/O schemas, and state atoms.

A tool card is the unit of registration. It couples a capability descriptor
(what the tool is for) with input/output schemas (how to call it) and
STRIPS-style preconditions/effects over opaque state atoms (when it applies
and what it changes).

The schema grammar is deliberately closed: nine node kinds with optional
``min``/``max``/``pattern`` constraints. It is not JSON Schema and does not
try to be; validation is total and reports JSON-pointer paths.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any

from .canonical import canonical_dumps

__all__ = [
    "CardError",
    "MalformedDocument",
    "MissingField",
    "BadEnum",
    "BadSchema",
    "Mode",
    "Group",
    "SchemaNode",
    "CapabilityDescriptor",
    "ConditionSet",
    "EffectSet",
    "ToolCard",
    "Violation",
    "ValidationReport",
    "parse_card",
    "card_to_json",
    "canonical_serialize_card",
    "schema_from_json",
    "schema_to_json",
    "validate_value",
    "preconditions_satisfied",
    "apply_effects",
]


class CardError(Exception):
    """Base class for card parsing errors."""


class MalformedDocument(CardError):
    """The document is not a JSON object with exactly the expected fields."""


class MissingField(CardError):
    """A required card field is absent."""

    def __init__(self, name: str):
        super().__init__(f"missing required field: {name}")
        self.name = name


class BadEnum(CardError):
    """A closed-vocabulary field holds an unknown value."""

    def __init__(self, fieldname: str, value: Any):
        super().__init__(f"bad value for {fieldname}: {value!r}")
        self.field = fieldname
        self.value = value


class BadSchema(CardError):
    """A schema subtree is invalid."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"bad schema at {path or '/'}: {reason}")
        self.path = path
        self.reason = reason


class Mode(str, enum.Enum):
    """Invocation mode. On-demand tools run once per query; continuous tools
    run as a background loop; event tools fire on a runtime condition."""

    ON_DEMAND = "on_demand"
    CONTINUOUS = "continuous"
    EVENT = "event"


class Group(str, enum.Enum):
    """Capability macro-group."""

    PERCEPTION = "perception"
    COGNITION = "cognition"
    REASONING = "reasoning"
    EXECUTION = "execution"


_SCHEMA_KINDS = {
    "string",
    "integer",
    "number",
    "boolean",
    "enum",
    "array",
    "object",
    "image_ref",
    "any",
}

# Constraint applicability: min/max bound the value for numeric kinds and the
# length for string/array; pattern applies to string only (re.search semantics).
_CONSTRAINT_KINDS = {
    "min": {"string", "integer", "number", "array"},
    "max": {"string", "integer", "number", "array"},
    "pattern": {"string"},
}


@dataclass(frozen=True)
class SchemaNode:
    """One node of the closed schema grammar."""

    kind: str
    values: tuple[str, ...] | None = None
    element: "SchemaNode | None" = None
    fields: dict[str, "SchemaNode"] | None = None
    required: tuple[str, ...] | None = None
    min: float | None = None
    max: float | None = None
    pattern: str | None = None


@dataclass(frozen=True)
class CapabilityDescriptor:
    group: Group
    subcategory: str
    tags: tuple[str, ...]
    applicability: str


@dataclass(frozen=True)
class ConditionSet:
    """require/forbid atom sets; disjoint by construction."""

    require: frozenset[str] = field(default_factory=frozenset)
    forbid: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class EffectSet:
    """add/delete atom sets; disjoint by construction."""

    add: frozenset[str] = field(default_factory=frozenset)
    delete: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class ToolCard:
    tool_id: str
    name: str
    description: str
    capability: CapabilityDescriptor
    input_schema: SchemaNode
    output_schema: SchemaNode
    preconditions: ConditionSet
    effects: EffectSet
    mode: Mode
    trigger_condition: str | None = None
    cost_hint_ms: int | None = None


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def to_json(self) -> dict[str, str]:
        return {"path": self.path, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict[str, Any]:
        return {"ok": self.ok, "violations": [v.to_json() for v in self.violations]}


def _pointer(parent: str, token: str) -> str:
    # RFC 6901 escaping: ~ before /.
    return parent + "/" + token.replace("~", "~0").replace("/", "~1")


def schema_from_json(obj: Any, path: str = "") -> SchemaNode:
    """Build a SchemaNode from its JSON form, raising BadSchema on any defect."""
    if not isinstance(obj, dict):
        raise BadSchema(path, "schema node must be an object")
    kind = obj.get("kind")
    if kind not in _SCHEMA_KINDS:
        raise BadSchema(path, f"unknown kind: {kind!r}")

    allowed = {"kind"}
    values: tuple[str, ...] | None = None
    element: SchemaNode | None = None
    fields: dict[str, SchemaNode] | None = None
    required: tuple[str, ...] | None = None

    if kind == "enum":
        allowed.add("values")
        raw = obj.get("values")
        if not isinstance(raw, list) or not raw or not all(isinstance(v, str) for v in raw):
            raise BadSchema(path, "enum requires a non-empty list of string values")
        values = tuple(sorted(set(raw)))
    elif kind == "array":
        allowed.update({"element", "min", "max"})
        if "element" not in obj:
            raise BadSchema(path, "array requires an element schema")
        element = schema_from_json(obj["element"], _pointer(path, "element"))
    elif kind == "object":
        allowed.update({"fields", "required"})
        raw_fields = obj.get("fields")
        if not isinstance(raw_fields, dict):
            raise BadSchema(path, "object requires a fields map")
        fields = {}
        for key in sorted(raw_fields):
            if not isinstance(key, str) or not key:
                raise BadSchema(path, "field names must be non-empty strings")
            fields[key] = schema_from_json(raw_fields[key], _pointer(_pointer(path, "fields"), key))
        raw_required = obj.get("required", [])
        if not isinstance(raw_required, list) or not all(isinstance(r, str) for r in raw_required):
            raise BadSchema(path, "required must be a list of field names")
        unknown_req = [r for r in raw_required if r not in fields]
        if unknown_req:
            raise BadSchema(path, f"required names unknown fields: {unknown_req}")
        required = tuple(sorted(set(raw_required)))
    if kind in ("string", "integer", "number"):
        allowed.update({"min", "max"})
    if kind == "string":
        allowed.add("pattern")

    extra = set(obj) - allowed
    if extra:
        raise BadSchema(path, f"unexpected keys for kind {kind}: {sorted(extra)}")

    minimum = obj.get("min")
    maximum = obj.get("max")
    for label, bound in (("min", minimum), ("max", maximum)):
        if bound is not None and (isinstance(bound, bool) or not isinstance(bound, (int, float))):
            raise BadSchema(path, f"{label} must be a number")
    if minimum is not None and maximum is not None and minimum > maximum:
        raise BadSchema(path, "min exceeds max")
    pattern = obj.get("pattern")
    if pattern is not None:
        if not isinstance(pattern, str):
            raise BadSchema(path, "pattern must be a string")
        try:
            re.compile(pattern)
        except re.error as exc:
            raise BadSchema(path, f"bad pattern: {exc}") from exc

    return SchemaNode(
        kind=kind,
        values=values,
        element=element,
        fields=fields,
        required=required,
        min=minimum,
        max=maximum,
        pattern=pattern,
    )


def schema_to_json(node: SchemaNode) -> dict[str, Any]:
    """Inverse of schema_from_json; omits unset optionals for a stable form."""
    out: dict[str, Any] = {"kind": node.kind}
    if node.kind == "enum":
        out["values"] = list(node.values or ())
    elif node.kind == "array":
        out["element"] = schema_to_json(node.element)  # type: ignore[arg-type]
    elif node.kind == "object":
        out["fields"] = {k: schema_to_json(v) for k, v in (node.fields or {}).items()}
        if node.required:
            out["required"] = list(node.required)
    if node.min is not None:
        out["min"] = node.min
    if node.max is not None:
        out["max"] = node.max
    if node.pattern is not None:
        out["pattern"] = node.pattern
    return out


def validate_value(value: Any, schema: SchemaNode) -> ValidationReport:
    """Validate ``value`` against ``schema``. Total: never raises, collects
    every violation with its JSON-pointer path."""
    violations: list[Violation] = []
    _validate(value, schema, "", violations)
    return ValidationReport(tuple(violations))


def _validate(value: Any, schema: SchemaNode, path: str, out: list[Violation]) -> None:
    kind = schema.kind
    if kind == "any":
        return
    if kind == "boolean":
        if not isinstance(value, bool):
            out.append(Violation(path, "expected boolean"))
        return
    if kind == "integer":
        if isinstance(value, bool) or not isinstance(value, int):
            out.append(Violation(path, "expected integer"))
            return
        _check_bounds(value, schema, path, out, "value")
        return
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            out.append(Violation(path, "expected number"))
            return
        if not math.isfinite(value):
            out.append(Violation(path, "expected finite number"))
            return
        _check_bounds(value, schema, path, out, "value")
        return
    if kind == "string":
        if not isinstance(value, str):
            out.append(Violation(path, "expected string"))
            return
        _check_bounds(len(value), schema, path, out, "length")
        if schema.pattern is not None and re.search(schema.pattern, value) is None:
            out.append(Violation(path, f"does not match pattern {schema.pattern!r}"))
        return
    if kind == "image_ref":
        # Opaque path to an image resource; only non-emptiness is checked here.
        if not isinstance(value, str) or not value:
            out.append(Violation(path, "expected non-empty image reference"))
        return
    if kind == "enum":
        if not isinstance(value, str) or value not in (schema.values or ()):
            out.append(Violation(path, f"expected one of {list(schema.values or ())}"))
        return
    if kind == "array":
        if not isinstance(value, list):
            out.append(Violation(path, "expected array"))
            return
        _check_bounds(len(value), schema, path, out, "length")
        for i, item in enumerate(value):
            _validate(item, schema.element, _pointer(path, str(i)), out)  # type: ignore[arg-type]
        return
    if kind == "object":
        if not isinstance(value, dict):
            out.append(Violation(path, "expected object"))
            return
        fields = schema.fields or {}
        for name in schema.required or ():
            if name not in value:
                out.append(Violation(_pointer(path, name), "missing required field"))
        for name in sorted(value):
            if name not in fields:
                # Strict objects: undeclared fields are rejected.
                out.append(Violation(_pointer(path, name), "unknown field"))
            else:
                _validate(value[name], fields[name], _pointer(path, name), out)
        return
    raise AssertionError(f"unreachable kind {kind}")


def _check_bounds(measure: float, schema: SchemaNode, path: str, out: list[Violation], label: str) -> None:
    if schema.min is not None and measure < schema.min:
        out.append(Violation(path, f"{label} below min {schema.min}"))
    if schema.max is not None and measure > schema.max:
        out.append(Violation(path, f"{label} above max {schema.max}"))


_CARD_FIELDS = {
    "tool_id",
    "name",
    "description",
    "capability",
    "input_schema",
    "output_schema",
    "preconditions",
    "effects",
    "mode",
    "trigger_condition",
    "cost_hint_ms",
}
_CAPABILITY_FIELDS = {"group", "subcategory", "tags", "applicability"}


def _atoms(obj: Any, owner: str, key: str) -> frozenset[str]:
    raw = obj.get(key)
    if raw is None:
        raise MissingField(f"{owner}.{key}")
    if not isinstance(raw, list) or not all(isinstance(a, str) and a for a in raw):
        raise MalformedDocument(f"{owner}.{key} must be a list of non-empty atom strings")
    return frozenset(raw)


def _require_str(doc: dict[str, Any], name: str, allow_empty: bool = False) -> str:
    if name not in doc:
        raise MissingField(name)
    value = doc[name]
    if not isinstance(value, str) or (not allow_empty and not value):
        raise MalformedDocument(f"{name} must be a non-empty string")
    return value


def parse_card(document: str | bytes | dict[str, Any]) -> ToolCard:
    """Parse one tool card from JSON text or an already-decoded object.

    Raises MalformedDocument, MissingField, BadEnum, or BadSchema.
    """
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedDocument(f"invalid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise MalformedDocument("card document must be a JSON object")
    extra = set(doc) - _CARD_FIELDS
    if extra:
        raise MalformedDocument(f"unexpected fields: {sorted(extra)}")

    tool_id = _require_str(doc, "tool_id")
    name = _require_str(doc, "name")
    description = _require_str(doc, "description")

    cap_raw = doc.get("capability")
    if cap_raw is None:
        raise MissingField("capability")
    if not isinstance(cap_raw, dict):
        raise MalformedDocument("capability must be an object")
    cap_extra = set(cap_raw) - _CAPABILITY_FIELDS
    if cap_extra:
        raise MalformedDocument(f"unexpected capability fields: {sorted(cap_extra)}")
    group_raw = cap_raw.get("group")
    if group_raw is None:
        raise MissingField("capability.group")
    try:
        group = Group(group_raw)
    except ValueError:
        raise BadEnum("capability.group", group_raw) from None
    subcategory = cap_raw.get("subcategory")
    if subcategory is None:
        raise MissingField("capability.subcategory")
    if not isinstance(subcategory, str) or not subcategory:
        raise MalformedDocument("capability.subcategory must be a non-empty string")
    tags_raw = cap_raw.get("tags")
    if tags_raw is None:
        raise MissingField("capability.tags")
    if not isinstance(tags_raw, list) or not tags_raw or not all(isinstance(t, str) and t for t in tags_raw):
        raise MalformedDocument("capability.tags must be a non-empty list of strings")
    applicability = cap_raw.get("applicability")
    if applicability is None:
        raise MissingField("capability.applicability")
    if not isinstance(applicability, str) or not applicability:
        raise MalformedDocument("capability.applicability must be a non-empty string")
    capability = CapabilityDescriptor(
        group=group,
        subcategory=subcategory,
        tags=tuple(sorted(set(tags_raw))),
        applicability=applicability,
    )

    for schema_field in ("input_schema", "output_schema"):
        if schema_field not in doc:
            raise MissingField(schema_field)
    input_schema = schema_from_json(doc["input_schema"], "")
    output_schema = schema_from_json(doc["output_schema"], "")

    pre_raw = doc.get("preconditions")
    if pre_raw is None:
        raise MissingField("preconditions")
    if not isinstance(pre_raw, dict) or set(pre_raw) - {"require", "forbid"}:
        raise MalformedDocument("preconditions must be {require, forbid}")
    require = _atoms(pre_raw, "preconditions", "require")
    forbid = _atoms(pre_raw, "preconditions", "forbid")
    if require & forbid:
        raise MalformedDocument(f"preconditions require/forbid overlap: {sorted(require & forbid)}")
    preconditions = ConditionSet(require=require, forbid=forbid)

    eff_raw = doc.get("effects")
    if eff_raw is None:
        raise MissingField("effects")
    if not isinstance(eff_raw, dict) or set(eff_raw) - {"add", "delete"}:
        raise MalformedDocument("effects must be {add, delete}")
    add = _atoms(eff_raw, "effects", "add")
    delete = _atoms(eff_raw, "effects", "delete")
    if add & delete:
        raise MalformedDocument(f"effects add/delete overlap: {sorted(add & delete)}")
    effects = EffectSet(add=add, delete=delete)

    mode_raw = doc.get("mode")
    if mode_raw is None:
        raise MissingField("mode")
    try:
        mode = Mode(mode_raw)
    except ValueError:
        raise BadEnum("mode", mode_raw) from None

    if "trigger_condition" not in doc:
        raise MissingField("trigger_condition")
    trigger = doc["trigger_condition"]
    if trigger is not None and (not isinstance(trigger, str) or not trigger):
        raise MalformedDocument("trigger_condition must be null or a non-empty string")

    cost = doc.get("cost_hint_ms")
    if cost is not None and (isinstance(cost, bool) or not isinstance(cost, int) or cost < 0):
        raise MalformedDocument("cost_hint_ms must be a non-negative integer")

    return ToolCard(
        tool_id=tool_id,
        name=name,
        description=description,
        capability=capability,
        input_schema=input_schema,
        output_schema=output_schema,
        preconditions=preconditions,
        effects=effects,
        mode=mode,
        trigger_condition=trigger,
        cost_hint_ms=cost,
    )


def card_to_json(card: ToolCard) -> dict[str, Any]:
    """JSON form of a card; atom sets and tags come out sorted."""
    out: dict[str, Any] = {
        "tool_id": card.tool_id,
        "name": card.name,
        "description": card.description,
        "capability": {
            "group": card.capability.group.value,
            "subcategory": card.capability.subcategory,
            "tags": sorted(card.capability.tags),
            "applicability": card.capability.applicability,
        },
        "input_schema": schema_to_json(card.input_schema),
        "output_schema": schema_to_json(card.output_schema),
        "preconditions": {
            "require": sorted(card.preconditions.require),
            "forbid": sorted(card.preconditions.forbid),
        },
        "effects": {
            "add": sorted(card.effects.add),
            "delete": sorted(card.effects.delete),
        },
        "mode": card.mode.value,
        "trigger_condition": card.trigger_condition,
    }
    if card.cost_hint_ms is not None:
        out["cost_hint_ms"] = card.cost_hint_ms
    return out


def canonical_serialize_card(card: ToolCard) -> str:
    return canonical_dumps(card_to_json(card))


def preconditions_satisfied(conditions: ConditionSet, state: set[str] | frozenset[str]) -> bool:
    """True when every required atom holds and no forbidden atom does."""
    return conditions.require <= state and not (conditions.forbid & state)


def apply_effects(state: set[str] | frozenset[str], effects: EffectSet) -> frozenset[str]:
    """(state \\ delete) | add, as a new frozenset; the input is not mutated."""
    return frozenset((set(state) - effects.delete) | effects.add)
