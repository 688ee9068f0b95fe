"""Canonical JSON serialization shared across the package.

Canonical form: object keys sorted, UTF-8, no insignificant whitespace.
Frames, card files, session records, and trace lines all go through here so
byte-level comparisons stay meaningful.
"""

from __future__ import annotations

import json
from typing import Any


def canonical_dumps(value: Any) -> str:
    """Serialize ``value`` to canonical JSON text."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_bytes(value: Any) -> bytes:
    """Serialize ``value`` to canonical JSON encoded as UTF-8."""
    return canonical_dumps(value).encode("utf-8")
