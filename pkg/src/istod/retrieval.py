"""Entity search: filter by predefined slots, order by the text remainder.

Filtering is exact on normalized values. Ordering is a pluggable ranker; the
shipped baseline scores token overlap between the text remainder and each
entity's column values. Suggestion building finds nearby slot configurations
with database support for proactive clarifying questions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .database import EntityDatabase, EntityRecord
from .errors import ConfigurationError
from .lexicon import STOP_WORDS, tokenize
from .state import normalize_value

logger = logging.getLogger(__name__)

# A ranker reorders entities given the free-text remainder of the preferences.
Ranker = Callable[[Sequence[EntityRecord], str], list[EntityRecord]]

DEFAULT_SUGGESTIONS_PER_SLOT = 3
MAX_SUGGESTION_ITEMS = 6


@dataclass(frozen=True)
class RankScore:
    """Congruence of one entity with the text remainder; higher is better."""

    entity_index: int
    score: float


@dataclass(frozen=True)
class SuggestionItem:
    """A candidate slot configuration with at least one supporting entity."""

    slot_configuration: dict[str, str]
    support_count: int


def filter_entities(db: EntityDatabase, slots: Mapping[str, str | None]) -> list[EntityRecord]:
    """Rows matching every non-none slot under normalized equality, original order."""
    constraints: dict[str, str] = {}
    for caption, value in slots.items():
        if value is None:
            continue
        if not db.has_column(caption):
            raise ConfigurationError(
                f"slot {caption!r} has no backing column in the {db.domain_caption!r} database"
            )
        constraints[caption] = normalize_value(value, caption)
    result = []
    for record in db.rows:
        if all(
            normalize_value(str(record.columns[caption]), caption) == wanted
            for caption, wanted in constraints.items()
        ):
            result.append(record)
    return result


def rank_scores(entities: Sequence[EntityRecord], text_part: str) -> list[RankScore]:
    """Normalized token overlap between the text remainder and each entity's values."""
    query = {t for t in tokenize(text_part) if t not in STOP_WORDS}
    scores = []
    for i, record in enumerate(entities):
        if not query:
            scores.append(RankScore(i, 0.0))
            continue
        entity_tokens = set(tokenize(record.text()))
        scores.append(RankScore(i, len(query & entity_tokens) / len(query)))
    return scores


def lexical_rank(entities: Sequence[EntityRecord], text_part: str) -> list[EntityRecord]:
    """Stable sort by descending overlap score; ties keep input order."""
    scores = rank_scores(entities, text_part)
    order = sorted(range(len(entities)), key=lambda i: (-scores[i].score, i))
    return [entities[i] for i in order]


def edit_distance(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a or not b:
        return max(len(a), len(b))
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def edit_similarity(a: str, b: str) -> float:
    """1.0 for identical strings, 0.0 for entirely different ones."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


def nearest_configurations(
    db: EntityDatabase,
    slot: str,
    current_value: str,
    fixed_slots: Mapping[str, str],
    k: int = DEFAULT_SUGGESTIONS_PER_SLOT,
) -> list[str]:
    """Up to k alternative values for one slot, preserving the other slots.

    Candidates are values of the slot occurring in rows that satisfy
    ``fixed_slots``; ranked by edit similarity to the current value, then by
    row support, then lexicographically. Never returns the current value.
    """
    current = normalize_value(current_value, slot)
    support: dict[str, int] = {}
    for record in filter_entities(db, fixed_slots):
        value = normalize_value(str(record.columns[slot]), slot)
        if value and value != current:
            support[value] = support.get(value, 0) + 1
    ranked = sorted(
        support,
        key=lambda value: (-edit_similarity(value, current), -support[value], value),
    )
    return ranked[:k]


def build_user_item_list(
    db: EntityDatabase,
    slots: Mapping[str, str],
    k: int = DEFAULT_SUGGESTIONS_PER_SLOT,
    max_items: int = MAX_SUGGESTION_ITEMS,
) -> list[SuggestionItem]:
    """Single-slot substitutions of the current configuration with database support.

    For each non-none slot in turn, substitute each of its nearest
    configurations while preserving the others, keep candidates whose query is
    non-empty, deduplicate, and cap the total length.
    """
    active = {
        caption: normalize_value(value, caption)
        for caption, value in slots.items()
        if value is not None
    }
    items: list[SuggestionItem] = []
    seen: set[tuple[tuple[str, str], ...]] = set()
    for caption in active:
        fixed = {c: v for c, v in active.items() if c != caption}
        for candidate in nearest_configurations(db, caption, active[caption], fixed, k):
            configuration = dict(active)
            configuration[caption] = candidate
            key = tuple(sorted(configuration.items()))
            if key in seen:
                continue
            matches = filter_entities(db, configuration)
            if not matches:
                continue
            seen.add(key)
            items.append(SuggestionItem(configuration, len(matches)))
            if len(items) >= max_items:
                return items
    return items
