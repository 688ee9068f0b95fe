"""Embodied tool protocol: tool cards, discovery, sessioned execution, and
the tool-use benchmark stack built on top of them."""

from .canonical import canonical_bytes, canonical_dumps
from .cards import (
    CardError,
    CapabilityDescriptor,
    ConditionSet,
    EffectSet,
    Group,
    Mode,
    SchemaNode,
    ToolCard,
    ValidationReport,
    Violation,
    apply_effects,
    canonical_serialize_card,
    card_to_json,
    parse_card,
    preconditions_satisfied,
    schema_from_json,
    schema_to_json,
    validate_value,
)
from .embedding import HashedBagOfWords, cosine_similarity
from .execution import (
    CountingClock,
    ExecutionEngine,
    ExecutionError,
    InvokeRequest,
    MockExecutor,
    SessionRecord,
)
from .metrics import (
    FAILURE_CATEGORIES,
    MetricReport,
    classify_failure,
    match_action,
    normalize_text,
    ordering_constraint_recall,
    score_chain,
    score_execution,
    score_need_recognition,
    score_selection,
    set_f1,
)
from .registry import DiscoveryQuery, Registry, RegistrySnapshot, load_registry_file
from .toolchain import (
    Binding,
    ChainSpec,
    OrderingConstraint,
    derive_constraints,
    perturb_noncanonical,
    plan_order,
    validate_chain,
)
from .wire import DEFAULT_ADDR, FrameReader, WireConnection, frame_decode, frame_encode
from .server import ToolServer, serve

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "canonical_bytes",
    "canonical_dumps",
    "CardError",
    "CapabilityDescriptor",
    "ConditionSet",
    "EffectSet",
    "Group",
    "Mode",
    "SchemaNode",
    "ToolCard",
    "ValidationReport",
    "Violation",
    "apply_effects",
    "canonical_serialize_card",
    "card_to_json",
    "parse_card",
    "preconditions_satisfied",
    "schema_from_json",
    "schema_to_json",
    "validate_value",
    "HashedBagOfWords",
    "cosine_similarity",
    "CountingClock",
    "ExecutionEngine",
    "ExecutionError",
    "InvokeRequest",
    "MockExecutor",
    "SessionRecord",
    "FAILURE_CATEGORIES",
    "MetricReport",
    "classify_failure",
    "match_action",
    "normalize_text",
    "ordering_constraint_recall",
    "score_chain",
    "score_execution",
    "score_need_recognition",
    "score_selection",
    "set_f1",
    "DiscoveryQuery",
    "Registry",
    "RegistrySnapshot",
    "load_registry_file",
    "Binding",
    "ChainSpec",
    "OrderingConstraint",
    "derive_constraints",
    "perturb_noncanonical",
    "plan_order",
    "validate_chain",
    "DEFAULT_ADDR",
    "FrameReader",
    "WireConnection",
    "frame_decode",
    "frame_encode",
    "ToolServer",
    "serve",
]
