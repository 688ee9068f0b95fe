"""Score prediction files against gold sidecars and render reports.

Predictions are JSONL rows keyed by sample_id. Expected payloads:

  need_recognition  {"need_tool": bool}
  selection         {"selected_tool_ids": ["tool_x"]}       exactly one entry
  execution         {"tool_call": {...}, "next_action": {...}}
  chain             {"predicted_tool_sequence": ["tool_a", ...]}

A structurally bad payload is scored as a miss, never an exception; only a
sample with no prediction row at all is an input error.
"""

from __future__ import annotations

from typing import Any

from .cards import parse_card, validate_value
from .metrics import (
    MalformedAction,
    MetricReport,
    match_action,
    score_chain,
    score_execution,
    score_need_recognition,
    score_selection,
)
from .toolchain import ChainSpec

__all__ = [
    "ReportingError",
    "MissingPrediction",
    "score_predictions",
    "render_report_lines",
    "flatten_report",
]


class ReportingError(Exception):
    """Prediction scoring could not run."""


class MissingPrediction(ReportingError):
    """A gold sample has no prediction row."""


def _index(preds: list[dict[str, Any]]) -> dict[str, dict[str, Any]]:
    out: dict[str, dict[str, Any]] = {}
    for row in preds:
        sid = row.get("sample_id")
        if not isinstance(sid, str):
            raise ReportingError("prediction row lacks a sample_id")
        out[sid] = row
    return out


def _pred_for(by_id: dict[str, dict[str, Any]], gold: dict[str, Any]) -> dict[str, Any]:
    sid = gold["sample_id"]
    if sid not in by_id:
        raise MissingPrediction(f"no prediction for sample {sid}")
    return by_id[sid]


def _score_recognition(preds, golds) -> MetricReport:
    by_id = _index(preds)
    pairs = []
    ids = []
    for gold in golds:
        row = _pred_for(by_id, gold)
        value = row.get("need_tool")
        # non-boolean payloads count as the wrong answer
        predicted = value if isinstance(value, bool) else not gold["needs_tool"]
        pairs.append((predicted, bool(gold["needs_tool"])))
        ids.append(gold["sample_id"])
    return score_need_recognition(pairs, sample_ids=ids)


def _score_selection(preds, golds) -> MetricReport:
    by_id = _index(preds)
    samples = []
    ids = []
    for gold in golds:
        row = _pred_for(by_id, gold)
        selected = row.get("selected_tool_ids")
        predicted = None
        if isinstance(selected, list) and len(selected) == 1 \
                and isinstance(selected[0], str):
            predicted = selected[0]
        candidates = frozenset(gold.get("candidate_ids") or [gold["tool_id"]])
        samples.append((predicted, gold["tool_id"], candidates))
        ids.append(gold["sample_id"])
    return score_selection(samples, sample_ids=ids)


def _score_execution(preds, golds) -> MetricReport:
    by_id = _index(preds)
    samples = []
    ids = []
    for gold in golds:
        row = _pred_for(by_id, gold)
        card_doc = gold.get("tool_card")
        if card_doc is None:
            raise ReportingError(
                f"gold row {gold['sample_id']} lacks tool_card; regenerate the dataset"
            )
        card = parse_card(card_doc)
        call = row.get("tool_call")
        valid = False
        if isinstance(call, dict) and call.get("tool_id") == card.tool_id:
            arguments = call.get("arguments")
            if arguments is not None:
                valid = validate_value(arguments, card.input_schema).ok
        action = row.get("next_action")
        try:
            match = bool(action) and match_action(action, gold["next_action"])
        except MalformedAction:
            match = False
        samples.append((valid, match))
        ids.append(gold["sample_id"])
    return score_execution(samples, sample_ids=ids)


def _score_chain(preds, golds) -> MetricReport:
    by_id = _index(preds)
    samples = []
    ids = []
    for gold in golds:
        row = _pred_for(by_id, gold)
        sequence = row.get("predicted_tool_sequence")
        if not isinstance(sequence, list) \
                or not all(isinstance(t, str) for t in sequence):
            sequence = []
        spec = ChainSpec.from_json(gold["chain"])
        samples.append((tuple(sequence), spec))
        ids.append(gold["sample_id"])
    return score_chain(samples, sample_ids=ids)


_SCORERS = {
    "need_recognition": _score_recognition,
    "selection": _score_selection,
    "execution": _score_execution,
    "chain": _score_chain,
}


def score_predictions(task: str, preds: list[dict[str, Any]],
                      golds: list[dict[str, Any]]) -> MetricReport:
    if task not in _SCORERS:
        raise ReportingError(f"unknown task {task!r}")
    if not golds:
        raise ReportingError("gold file is empty")
    return _SCORERS[task](preds, golds)


# --------------------------------------------------------------------------
# delimited rendering

def flatten_report(report: Any, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(report, MetricReport):
        report = report.to_json()
        report.pop("per_sample", None)
    out: list[tuple[str, Any]] = []
    if isinstance(report, dict):
        for key in report:
            path = f"{prefix}.{key}" if prefix else str(key)
            out.extend(flatten_report(report[key], path))
    elif isinstance(report, (list, tuple)):
        for i, item in enumerate(report):
            out.extend(flatten_report(item, f"{prefix}[{i}]"))
    else:
        out.append((prefix, report))
    return out


def render_report_lines(report: Any) -> list[str]:
    """Tab-delimited key/value lines, floats rendered at full precision."""
    lines = []
    for key, value in flatten_report(report):
        if isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key}\t{rendered}")
    return lines
