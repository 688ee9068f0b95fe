"""Tool registry: revisioned card store with capability-based discovery.

Discovery is decoupled from calling conventions: queries filter on the
capability descriptor, free text, and state-atom applicability, never on
schemas. Mutations bump a strictly increasing revision counter so snapshots
can be compared.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .canonical import canonical_dumps
from .cards import CardError, Group, ToolCard, card_to_json, parse_card, preconditions_satisfied

__all__ = [
    "RegistryError",
    "InvalidCard",
    "DiscoveryQuery",
    "RegistrySnapshot",
    "Registry",
    "load_registry_file",
    "dump_registry_file",
]


class RegistryError(Exception):
    """Base class for registry errors."""


class InvalidCard(RegistryError):
    """A document offered for registration failed card validation."""


@dataclass(frozen=True)
class DiscoveryQuery:
    """Conjunctive filter over registered cards.

    Absent fields do not filter; the empty query matches everything.
    ``text`` is a case-insensitive substring over name, description, and
    applicability. ``state`` keeps only cards whose preconditions are
    satisfied by the given atoms.
    """

    group: Group | None = None
    tags_any: frozenset[str] = field(default_factory=frozenset)
    tags_all: frozenset[str] = field(default_factory=frozenset)
    text: str | None = None
    state: frozenset[str] | None = None

    def matches(self, card: ToolCard) -> bool:
        if self.group is not None and card.capability.group is not self.group:
            return False
        tags = set(card.capability.tags)
        if self.tags_any and not (self.tags_any & tags):
            return False
        if self.tags_all and not (self.tags_all <= tags):
            return False
        if self.text is not None:
            needle = self.text.lower()
            haystack = "\n".join((card.name, card.description, card.capability.applicability)).lower()
            if needle not in haystack:
                return False
        if self.state is not None and not preconditions_satisfied(card.preconditions, self.state):
            return False
        return True


@dataclass(frozen=True)
class RegistrySnapshot:
    """Point-in-time view of the registry; immune to later mutations."""

    revision: int
    cards: dict[str, ToolCard]

    def __len__(self) -> int:
        return len(self.cards)

    def __contains__(self, tool_id: str) -> bool:
        return tool_id in self.cards

    def get(self, tool_id: str) -> ToolCard | None:
        return self.cards.get(tool_id)

    def __iter__(self) -> Iterator[ToolCard]:
        for tool_id in sorted(self.cards):
            yield self.cards[tool_id]

    def discover(self, query: DiscoveryQuery | None = None) -> list[ToolCard]:
        query = query or DiscoveryQuery()
        return [card for card in self if query.matches(card)]


class Registry:
    """Mutable card store. Thread-safe; reads see consistent snapshots."""

    def __init__(self, cards: Iterable[ToolCard] = ()):  # initial load counts as one revision per card
        self._lock = threading.Lock()
        self._cards: dict[str, ToolCard] = {}
        self._revision = 0
        for card in cards:
            self.register(card)

    @property
    def revision(self) -> int:
        return self._revision

    def __len__(self) -> int:
        return len(self._cards)

    def register(self, card: ToolCard | dict | str | bytes) -> tuple[int, bool]:
        """Insert or replace a card (last write wins).

        Returns (revision, replaced). Raises InvalidCard if the document does
        not parse as a card.
        """
        if not isinstance(card, ToolCard):
            try:
                card = parse_card(card)
            except CardError as exc:
                raise InvalidCard(str(exc)) from exc
        with self._lock:
            replaced = card.tool_id in self._cards
            self._cards[card.tool_id] = card
            self._revision += 1
            return self._revision, replaced

    def deregister(self, tool_id: str) -> bool:
        """Remove a card. The revision bumps only when something was removed."""
        with self._lock:
            if tool_id not in self._cards:
                return False
            del self._cards[tool_id]
            self._revision += 1
            return True

    def get(self, tool_id: str) -> ToolCard | None:
        with self._lock:
            return self._cards.get(tool_id)

    def snapshot(self) -> RegistrySnapshot:
        with self._lock:
            return RegistrySnapshot(revision=self._revision, cards=dict(self._cards))

    def discover(self, query: DiscoveryQuery | None = None) -> list[ToolCard]:
        """Cards matching the query, ordered by tool_id ascending."""
        return self.snapshot().discover(query)


def load_registry_file(path: str | Path) -> Registry:
    """Load a registry from a JSON array of card objects."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidCard(f"registry file is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise InvalidCard("registry file must hold a JSON array of cards")
    registry = Registry()
    for i, doc in enumerate(raw):
        try:
            registry.register(parse_card(doc))
        except CardError as exc:
            raise InvalidCard(f"card #{i}: {exc}") from exc
    return registry


def dump_registry_file(registry: Registry | RegistrySnapshot, path: str | Path) -> None:
    """Write the registry as a canonical JSON array ordered by tool_id."""
    snap = registry.snapshot() if isinstance(registry, Registry) else registry
    payload = [card_to_json(card) for card in snap]
    Path(path).write_text(canonical_dumps(payload) + "\n", encoding="utf-8")
