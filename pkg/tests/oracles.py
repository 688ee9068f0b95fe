"""Brute-force reference scorers used to cross-check the metrics module.

Everything in here is written the long way round on purpose: explicit
counting loops, list.index position scans, and fraction arithmetic instead
of the vectorized or dict-based routes the library takes. The test suite
generates randomized inputs, runs both implementations, and requires
agreement to 1e-12.
"""

from __future__ import annotations

import random
import string
from fractions import Fraction
from typing import Any, Sequence

from etp.toolchain import Binding, ChainSpec, OrderingConstraint


def _ratio(num: int, den: int) -> float:
    if den == 0:
        return 0.0
    return float(Fraction(num, den))


# ---------------------------------------------------------------------------
# task 1: boolean need-recognition pairs


def oracle_recognition(pairs: Sequence[tuple[bool, bool]]) -> dict[str, float]:
    preds = [bool(p) for p, _ in pairs]
    golds = [bool(g) for _, g in pairs]
    n = len(pairs)
    tp = sum(1 for i in range(n) if preds[i] and golds[i])
    fp = sum(1 for i in range(n) if preds[i] and not golds[i])
    fn = sum(1 for i in range(n) if not preds[i] and golds[i])
    tn = n - tp - fp - fn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return {
        "accuracy": _ratio(tp + tn, n),
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


# ---------------------------------------------------------------------------
# task 2: candidate selection triples


def oracle_selection(
    samples: Sequence[tuple[str | None, str, Sequence[str]]],
) -> dict[str, float]:
    hits = 0
    escaped = 0
    for pred, gold, candidates in samples:
        if pred is not None and pred not in list(candidates):
            escaped += 1
            continue
        if pred == gold:
            hits += 1
    return {
        "csr": _ratio(hits, len(samples)),
        "out_of_candidates": float(escaped),
    }


# ---------------------------------------------------------------------------
# task 3: execution stage flags


def oracle_execution(samples: Sequence[tuple[bool, bool]]) -> dict[str, float]:
    n = len(samples)
    valid = [bool(v) for v, _ in samples]
    match = [bool(m) for _, m in samples]
    both = [valid[i] and match[i] for i in range(n)]
    return {
        "isr": _ratio(sum(valid), n),
        "amr": _ratio(sum(match), n),
        "tusr": _ratio(sum(both), n),
    }


# ---------------------------------------------------------------------------
# task 4: chain scoring


def oracle_set_f1(predicted: Sequence[str], gold: Sequence[str]) -> float:
    # Harmonic-mean route rather than the closed form.
    a = sorted(set(predicted))
    b = sorted(set(gold))
    if not a and not b:
        return 1.0
    overlap = sum(1 for t in a if t in b)
    if overlap == 0:
        return 0.0
    precision = Fraction(overlap, len(a))
    recall = Fraction(overlap, len(b))
    return float(2 * precision * recall / (precision + recall))


def oracle_ocr(predicted: Sequence[str], constraints: Sequence[tuple[str, str]]) -> float:
    seq = list(predicted)
    good = 0
    for before, after in constraints:
        if before not in seq or after not in seq:
            continue
        if seq.index(before) < seq.index(after):
            good += 1
    return _ratio(good, len(constraints))


def oracle_chain(
    samples: Sequence[tuple[Sequence[str], ChainSpec]],
) -> dict[str, float]:
    n = len(samples)
    acc_total = Fraction(0)
    f1_total = 0.0
    ocr_total = 0.0
    for predicted, spec in samples:
        if sorted(set(predicted)) == sorted(spec.gold_set):
            acc_total += 1
        f1_total += oracle_set_f1(predicted, sorted(spec.gold_set))
        ocr_total += oracle_ocr(predicted, [(c.before, c.after) for c in spec.constraints])
    return {
        "acc": float(acc_total / n),
        "f1": f1_total / n,
        "ocr": ocr_total / n,
    }


# ---------------------------------------------------------------------------
# randomized sample generators


def gen_recognition_samples(rng: random.Random, n: int) -> list[tuple[bool, bool]]:
    out = []
    for _ in range(n):
        gold = rng.random() < 0.5
        pred = gold if rng.random() < 0.7 else not gold
        out.append((pred, gold))
    return out


def gen_selection_samples(
    rng: random.Random, n: int
) -> list[tuple[str | None, str, list[str]]]:
    out: list[tuple[str | None, str, list[str]]] = []
    for i in range(n):
        k = rng.randint(2, 6)
        candidates = [f"tool_{i}_{j}" for j in range(k)]
        gold = rng.choice(candidates)
        roll = rng.random()
        if roll < 0.55:
            pred: str | None = gold
        elif roll < 0.8:
            pred = rng.choice(candidates)
        elif roll < 0.9:
            pred = f"stranger_{i}"
        else:
            pred = None
        out.append((pred, gold, candidates))
    return out


def gen_execution_samples(rng: random.Random, n: int) -> list[tuple[bool, bool]]:
    return [(rng.random() < 0.75, rng.random() < 0.6) for _ in range(n)]


def random_chain_spec(rng: random.Random, min_size: int = 2, max_size: int = 6) -> ChainSpec:
    """A random acyclic spec: tools ordered, constraints only point forward."""
    size = rng.randint(min_size, max_size)
    letters = rng.sample(string.ascii_lowercase, size)
    tools = [f"tool_{c}" for c in letters]
    constraints = []
    for i in range(size):
        for j in range(i + 1, size):
            if rng.random() < 0.4:
                kind = rng.choice(["data", "state", "declared"])
                constraints.append(OrderingConstraint(tools[i], tools[j], kind))
    if not constraints:
        constraints.append(OrderingConstraint(tools[0], tools[-1], "declared"))
    pool = set(tools)
    for extra in range(rng.randint(0, 3)):
        pool.add(f"filler_{extra}")
    return ChainSpec(
        gold_set=frozenset(tools),
        constraints=tuple(constraints),
        bindings=(Binding(tools[0], "out", tools[-1], "in"),),
        candidate_pool=frozenset(pool),
    )


def gen_chain_samples(
    rng: random.Random, n: int
) -> list[tuple[list[str], ChainSpec]]:
    out = []
    for _ in range(n):
        spec = random_chain_spec(rng)
        pool = sorted(spec.candidate_pool)
        roll = rng.random()
        if roll < 0.4:
            # A valid plan: random topological order via seeded shuffle + scan.
            predicted = _random_valid_order(rng, spec)
        elif roll < 0.7:
            predicted = rng.sample(pool, rng.randint(1, len(pool)))
        else:
            predicted = [rng.choice(pool) for _ in range(rng.randint(1, len(pool) + 2))]
        out.append((predicted, spec))
    return out


def _random_valid_order(rng: random.Random, spec: ChainSpec) -> list[str]:
    remaining = sorted(spec.gold_set)
    rng.shuffle(remaining)
    placed: list[str] = []
    while remaining:
        for tool in remaining:
            blockers = [
                c.before
                for c in spec.constraints
                if c.after == tool and c.before not in placed
            ]
            if not blockers:
                placed.append(tool)
                remaining.remove(tool)
                break
        else:  # pragma: no cover - specs are acyclic by construction
            raise AssertionError("cyclic spec from generator")
    return placed
