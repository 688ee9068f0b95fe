"""Benchmark scoring: the four task metrics and the failure taxonomy.

Task 1 (need recognition): accuracy / precision / recall / F1 over boolean
pairs, positive class = "tool needed", with the 0-denominator convention
F1 = 0. Task 2 (selection): correct-selection rate. Task 3 (execution):
invocation-success, action-match, and their conjunction. Task 4 (chain):
exact-set accuracy, set F1, and ordering-constraint recall, all per-sample
means.

Failure classification is a fixed-precedence five-way taxonomy; every step
maps to exactly one category or to None.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .toolchain import ChainSpec, validate_chain

__all__ = [
    "MetricsError",
    "EmptyInput",
    "MalformedAction",
    "MissingAnnotation",
    "EmptyConstraintSet",
    "MetricReport",
    "score_need_recognition",
    "score_selection",
    "score_execution",
    "score_chain",
    "set_f1",
    "ordering_constraint_recall",
    "match_action",
    "normalize_text",
    "MISSED_TOOL_INVOCATION",
    "INVALID_TOOL_CALL",
    "WRONG_SELECTION",
    "IGNORED_OUTPUT",
    "TOOL_INDUCED_BIAS",
    "FAILURE_CATEGORIES",
    "classify_failure",
    "OUT_OF_CANDIDATES",
]


class MetricsError(Exception):
    """Base class for scoring errors."""


class EmptyInput(MetricsError):
    """A scorer received zero samples."""


class MalformedAction(MetricsError):
    """An action payload is structurally unusable for matching."""


class MissingAnnotation(MetricsError):
    """A trace step lacks the gold annotations classification needs."""


class EmptyConstraintSet(MetricsError):
    """A chain sample has no ordering constraints; OCR is undefined."""

    def __init__(self, sample_id: str):
        super().__init__(f"sample {sample_id!r} has an empty constraint set")
        self.sample_id = sample_id


OUT_OF_CANDIDATES = "out_of_candidates"

MISSED_TOOL_INVOCATION = "missed_tool_invocation"
INVALID_TOOL_CALL = "invalid_tool_call"
WRONG_SELECTION = "wrong_selection"
IGNORED_OUTPUT = "ignored_output"
TOOL_INDUCED_BIAS = "tool_induced_bias"
FAILURE_CATEGORIES = (
    MISSED_TOOL_INVOCATION,
    INVALID_TOOL_CALL,
    WRONG_SELECTION,
    IGNORED_OUTPUT,
    TOOL_INDUCED_BIAS,
)


@dataclass
class MetricReport:
    """Aggregated scores plus enough detail to audit every sample."""

    task: str
    n: int
    metrics: dict[str, float]
    counts: dict[str, int] = field(default_factory=dict)
    per_sample: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "n": self.n,
            "metrics": self.metrics,
            "counts": self.counts,
            "per_sample": self.per_sample,
        }


def _require_samples(samples: Sequence[Any], task: str) -> None:
    if not samples:
        raise EmptyInput(f"no samples for task {task}")


def score_need_recognition(
    pairs: Sequence[tuple[bool, bool]],
    sample_ids: Sequence[str] | None = None,
) -> MetricReport:
    """Score (predicted, gold) boolean pairs; positive class is gold=True."""
    _require_samples(pairs, "recognition")
    tp = fp = fn = tn = 0
    per_sample = []
    for i, (pred, gold) in enumerate(pairs):
        if pred and gold:
            tp += 1
        elif pred and not gold:
            fp += 1
        elif not pred and gold:
            fn += 1
        else:
            tn += 1
        per_sample.append(
            {
                "sample_id": sample_ids[i] if sample_ids else str(i),
                "predicted": bool(pred),
                "gold": bool(gold),
                "correct": pred == gold,
            }
        )
    n = len(pairs)
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return MetricReport(
        task="recognition",
        n=n,
        metrics={
            "accuracy": (tp + tn) / n,
            "precision": precision,
            "recall": recall,
            "f1": f1,
        },
        counts={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
        per_sample=per_sample,
    )


def score_selection(
    samples: Sequence[tuple[str | None, str, Sequence[str]]],
    sample_ids: Sequence[str] | None = None,
) -> MetricReport:
    """Score (predicted id, gold id, candidate ids) triples.

    A prediction outside the candidate list is incorrect and flagged
    out_of_candidates rather than raising.
    """
    _require_samples(samples, "selection")
    correct_n = 0
    out_of_candidates = 0
    per_sample = []
    for i, (pred, gold, candidates) in enumerate(samples):
        correct = pred == gold
        flag = None
        if pred is not None and pred not in candidates:
            flag = OUT_OF_CANDIDATES
            out_of_candidates += 1
            correct = False
        if correct:
            correct_n += 1
        entry: dict[str, Any] = {
            "sample_id": sample_ids[i] if sample_ids else str(i),
            "predicted": pred,
            "gold": gold,
            "correct": correct,
        }
        if flag:
            entry["flag"] = flag
        per_sample.append(entry)
    return MetricReport(
        task="selection",
        n=len(samples),
        metrics={"csr": correct_n / len(samples)},
        counts={"correct": correct_n, "out_of_candidates": out_of_candidates},
        per_sample=per_sample,
    )


def score_execution(
    samples: Sequence[tuple[bool, bool]],
    sample_ids: Sequence[str] | None = None,
) -> MetricReport:
    """Score (valid, match) stage flags per sample."""
    _require_samples(samples, "execution")
    per_sample = []
    valid_n = match_n = both = 0
    for i, (valid, match) in enumerate(samples):
        valid_n += valid
        match_n += match
        both += valid and match
        per_sample.append(
            {
                "sample_id": sample_ids[i] if sample_ids else str(i),
                "valid": bool(valid),
                "match": bool(match),
            }
        )
    n = len(samples)
    return MetricReport(
        task="execution",
        n=n,
        metrics={"isr": valid_n / n, "amr": match_n / n, "tusr": both / n},
        counts={"valid": valid_n, "match": match_n, "valid_and_match": both},
        per_sample=per_sample,
    )


def set_f1(predicted: Iterable[str], gold: Iterable[str]) -> float:
    """2|A∩B| / (|A|+|B|) over deduplicated sets; both empty counts as 1."""
    a, b = set(predicted), set(gold)
    if not a and not b:
        return 1.0
    return 2 * len(a & b) / (len(a) + len(b))


def ordering_constraint_recall(predicted: Sequence[str], spec: ChainSpec) -> float:
    """Fraction of gold constraints satisfied by the predicted sequence."""
    if not spec.constraints:
        raise EmptyConstraintSet("<anonymous>")
    return validate_chain(predicted, spec).order_ratio


def score_chain(
    samples: Sequence[tuple[Sequence[str], ChainSpec]],
    sample_ids: Sequence[str] | None = None,
) -> MetricReport:
    """Score (predicted sequence, chain spec) pairs.

    Raises EmptyConstraintSet (with the offending sample id) when any spec
    carries no constraints; OCR needs at least one.
    """
    _require_samples(samples, "chain")
    per_sample = []
    acc_sum = f1_sum = ocr_sum = 0.0
    for i, (predicted, spec) in enumerate(samples):
        sid = sample_ids[i] if sample_ids else str(i)
        if not spec.constraints:
            raise EmptyConstraintSet(sid)
        report = validate_chain(predicted, spec)
        acc = 1.0 if report.set_exact else 0.0
        f1 = set_f1(predicted, spec.gold_set)
        ocr = report.order_ratio
        acc_sum += acc
        f1_sum += f1
        ocr_sum += ocr
        per_sample.append(
            {
                "sample_id": sid,
                "acc": acc,
                "f1": f1,
                "ocr": ocr,
                "extras": list(report.extras),
                "missing": list(report.missing),
            }
        )
    n = len(samples)
    return MetricReport(
        task="chain",
        n=n,
        metrics={"acc": acc_sum / n, "f1": f1_sum / n, "ocr": ocr_sum / n},
        counts={"exact": int(acc_sum)},
        per_sample=per_sample,
    )


def normalize_text(value: str) -> str:
    """Trim, collapse internal whitespace, casefold."""
    return " ".join(value.split()).casefold()


def _normalized(value: Any) -> Any:
    if isinstance(value, str):
        return normalize_text(value)
    if isinstance(value, list):
        return [_normalized(v) for v in value]
    if isinstance(value, dict):
        return {k: _normalized(v) for k, v in value.items()}
    return value


def _check_action(action: Any, who: str) -> dict[str, Any]:
    if not isinstance(action, dict):
        raise MalformedAction(f"{who} action must be an object")
    action_type = action.get("action_type")
    if not isinstance(action_type, str) or not action_type:
        raise MalformedAction(f"{who} action lacks a usable action_type")
    target = action.get("target", "")
    if not isinstance(target, str):
        raise MalformedAction(f"{who} action target must be a string")
    reference = action.get("reference", {})
    if not isinstance(reference, dict):
        raise MalformedAction(f"{who} action reference must be an object")
    return {"action_type": action_type, "target": target, "reference": reference}


def match_action(predicted: Any, gold: Any) -> bool:
    """Semantic action match.

    action_type must agree after casefolding; targets after whitespace
    normalization; every gold reference key must be present in the predicted
    reference with an equal normalized value. Extra predicted reference keys
    are ignored. Raises MalformedAction on structurally unusable payloads.
    """
    p = _check_action(predicted, "predicted")
    g = _check_action(gold, "gold")
    if normalize_text(p["action_type"]) != normalize_text(g["action_type"]):
        return False
    if normalize_text(p["target"]) != normalize_text(g["target"]):
        return False
    for key, value in g["reference"].items():
        if key not in p["reference"]:
            return False
        if _normalized(p["reference"][key]) != _normalized(value):
            return False
    return True


def _leaf_strings(value: Any, out: set[str]) -> None:
    if isinstance(value, str):
        out.add(normalize_text(value))
    elif isinstance(value, list):
        for v in value:
            _leaf_strings(v, out)
    elif isinstance(value, dict):
        for v in value.values():
            _leaf_strings(v, out)


def _cites_tool_output(action: Mapping[str, Any], outputs: Sequence[Any]) -> bool:
    """True when some normalized string in the action reference appears among
    the leaf strings of any tool output."""
    available: set[str] = set()
    for output in outputs:
        _leaf_strings(output, available)
    if not available:
        return False
    cited: set[str] = set()
    _leaf_strings(action.get("reference", {}), cited)
    return bool(cited & available)


def classify_failure(step: Mapping[str, Any]) -> str | None:
    """Classify one trace step into exactly one failure category or None.

    Precedence is fixed: missed invocation, invalid call, wrong selection,
    ignored output, tool-induced bias. ``step`` is a trace-step record:

    - step["gold"]: {"need_tool", "tool_id"?, "action", "fallback_action"?}
    - step["decision"]: {"need_tool", "tool_calls": [...], "action"}
    - step["sessions"]: serialized session records for executed calls
    - step["rejected"]: set when the harness refused the decision

    Raises MissingAnnotation when the gold block is unusable.
    """
    gold = step.get("gold")
    if not isinstance(gold, Mapping) or "need_tool" not in gold:
        raise MissingAnnotation("step lacks gold annotations")
    decision = step.get("decision")
    if not isinstance(decision, Mapping):
        raise MissingAnnotation("step lacks a decision record")
    gold_need = bool(gold["need_tool"])
    gold_action = gold.get("action")
    if gold_action is None:
        raise MissingAnnotation("gold annotations lack an action")

    calls = list(decision.get("tool_calls") or [])
    rejected = bool(step.get("rejected", False))
    sessions = list(step.get("sessions") or [])

    # 1. Needed a tool, never tried one.
    if gold_need and not calls and not rejected:
        return MISSED_TOOL_INVOCATION

    attempted = bool(calls) or rejected

    # 2. Tried, but the attempt itself was unusable.
    if attempted:
        schema_invalid = any(
            s.get("status") == "failed" and s.get("reason") == "schema_violation" for s in sessions
        )
        if rejected or schema_invalid:
            return INVALID_TOOL_CALL

    # 3. Tried a tool, but not the right one.
    if calls:
        first = calls[0].get("tool_id")
        if gold.get("tool_id") is None or first != gold["tool_id"]:
            return WRONG_SELECTION

    action = decision.get("action")
    try:
        matches_gold = match_action(action, gold_action) if action is not None else False
    except MalformedAction:
        matches_gold = False

    if matches_gold:
        return None

    # 4. Right tool, usable output, but the final action pretends no tool ran.
    fallback = gold.get("fallback_action")
    if calls and fallback is not None:
        try:
            if action is not None and match_action(action, fallback):
                return IGNORED_OUTPUT
        except MalformedAction:
            pass

    # 5. The action leans on tool output yet contradicts the gold action.
    outputs = [s.get("output") for s in sessions if s.get("status") == "completed"]
    if action is not None and isinstance(action, Mapping) and _cites_tool_output(action, outputs):
        return TOOL_INDUCED_BIAS

    return None
