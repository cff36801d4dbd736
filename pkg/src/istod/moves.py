"""The eleven dialogue moves: each mutates the information state and/or yields an utterance.

Moves are plain functions over (state, inputs). Surface text comes from
templates with slot interpolation so facts stay testable; a language-model
backend may paraphrase presentation elsewhere but never alters what a move
records in the state.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

from .database import EntityDatabase, EntityRecord
from .errors import ContractViolationError, ConfigurationError, IstodError, MoveError
from .lexicon import tokenize
from .nlu import ExtractionOutcome, Extractor
from .retrieval import (
    DEFAULT_SUGGESTIONS_PER_SLOT,
    MAX_SUGGESTION_ITEMS,
    Ranker,
    build_user_item_list,
    filter_entities,
    lexical_rank,
)
from .state import InformationState, TriFlag

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DialogueMove:
    """A named transition bound to the ordered procedures performed during it."""

    name: str
    procedures: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.procedures:
            raise ConfigurationError(f"move {self.name!r} has an empty procedure list")
        if self.procedures[0] != self.name:
            raise ConfigurationError(
                f"move {self.name!r} must be titled after its main procedure"
            )


@dataclass(frozen=True)
class MoveOutcome:
    """What one executed move produced: an utterance, a pause, and state deltas."""

    tod_utterance: str | None
    awaiting_user: bool
    state_deltas: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if self.awaiting_user and not self.tod_utterance:
            raise ContractViolationError("a move awaiting the user must carry an utterance")


DIALOGUE_MOVES: tuple[DialogueMove, ...] = (
    DialogueMove(
        "update_user_preferences",
        (
            "update_user_preferences",
            "build_extraction_prompt",
            "complete",
            "parse_extraction_response",
            "apply_extracted_preferences",
        ),
    ),
    DialogueMove(
        "check_is_there_wrong_or_out_of_main_value",
        ("check_is_there_wrong_or_out_of_main_value", "collect_wrong_entries"),
    ),
    DialogueMove(
        "create_clarifying_question_input_is_wrong_or_out_of_domain",
        ("create_clarifying_question_input_is_wrong_or_out_of_domain", "render_wrong_value_question"),
    ),
    DialogueMove(
        "create_clarifying_question_queryoutput_is_empty_output_is_rejected",
        (
            "create_clarifying_question_queryoutput_is_empty_output_is_rejected",
            "build_user_item_list",
            "render_suggestion_question",
        ),
    ),
    DialogueMove(
        "inform_user_there_is_no_entity_in_db",
        ("inform_user_there_is_no_entity_in_db", "render_no_entity_message"),
    ),
    DialogueMove("query_database", ("query_database", "filter_entities")),
    DialogueMove(
        "check_the_emptiness_of_query_output", ("check_the_emptiness_of_query_output",)
    ),
    DialogueMove(
        "check_if_the_user_wants_to_enter_more_constraints",
        (
            "check_if_the_user_wants_to_enter_more_constraints",
            "prompt_more_constraints",
            "classify_more_constraints",
        ),
    ),
    DialogueMove(
        "entity_ranking", ("entity_ranking", "lexical_rank", "render_entity_table")
    ),
    DialogueMove("check_if_user_rejects_output", ("check_if_user_rejects_output",)),
    DialogueMove("end_dialogue", ("end_dialogue", "print_predefined_slots")),
)

MOVE_NAMES = tuple(move.name for move in DIALOGUE_MOVES)

END_DIALOGUE_MESSAGE = (
    "I'm sorry, but this is the end of our dialogue. If you have any more questions or "
    "need further assistance in the future, feel free to ask. Have a great day!"
)


def _preference_summary(state: InformationState) -> str:
    pairs = state.slot_map()
    return ", ".join(f"{caption}: {value}" for caption, value in pairs.items())


def update_user_preferences(
    state: InformationState, utterance: str, extractor: Extractor
) -> ExtractionOutcome:
    """Extract per-slot configurations from the utterance and fold them into the state.

    In-domain values overwrite the slot map, residual constraints are prepended
    to the text remainder, and the full outcome is returned so the wrongness
    check can run on it. On backend failure the state is left unchanged.
    """
    if not utterance.strip():
        raise ContractViolationError("cannot update preferences from an empty utterance")
    try:
        outcome = extractor.extract(utterance)
    except IstodError:
        raise
    except Exception as exc:  # backend bugs must not corrupt the session
        raise MoveError("extraction backend failed", diagnostic=repr(exc)) from exc
    for caption, entry in outcome.slots.items():
        if entry.value is not None and caption in state.predefined_slots:
            state.predefined_slots[caption] = entry.value
    if outcome.text_part:
        state.text_part = (outcome.text_part + " " + state.text_part).strip()
    return outcome


def check_is_there_wrong_or_out_of_main_value(
    state: InformationState, outcome: ExtractionOutcome
) -> bool:
    """Record wrong/out-of-domain entries (schema slot order) and flag their presence."""
    ordered = list(state.extracted_information["captions"])
    entries = [
        (caption, outcome.slots[caption].wrong_or_out_of_domain)
        for caption in ordered
        if caption in outcome.slots
        and outcome.slots[caption].wrong_or_out_of_domain is not None
    ]
    state.wrong_or_out_of_domain_values_list = [(c, w) for c, w in entries]
    state.there_is_wrong_or_out_of_domain_value = TriFlag.of(bool(entries))
    return bool(entries)


def create_clarifying_question_input_is_wrong_or_out_of_domain(state: InformationState) -> str:
    """Ask the user to fix every wrong value, warning they are otherwise treated as none."""
    if not state.wrong_or_out_of_domain_values_list:
        raise ContractViolationError("no wrong or out-of-domain values to clarify")
    listed = "; ".join(
        f"{caption}: '{raw}'" for caption, raw in state.wrong_or_out_of_domain_values_list
    )
    question = (
        f"The entered configurations {listed} are identified as incorrect or out-of-domain "
        "and must be changed; if they are not changed, they will be considered as 'none'. "
        "Please enter your updated preferences."
    )
    state.utterance_to_update_predefined_slot = question
    return question


def query_database(state: InformationState, db: EntityDatabase | None) -> list[EntityRecord]:
    """Retrieve the entities congruent with every non-none filterable slot."""
    if db is None:
        raise ConfigurationError("no database loaded for this session")
    if state.there_is_wrong_or_out_of_domain_value is TriFlag.TRUE:
        raise ContractViolationError("cannot query while wrong values are pending")
    filterable = set(state.extracted_information["filterable_captions"])
    constraints = {
        caption: value.normalized
        for caption, value in state.predefined_slots.items()
        if value is not None and caption in filterable
    }
    rows = filter_entities(db, constraints)
    state.db_query_output_list = rows
    return rows


def check_the_emptiness_of_query_output(state: InformationState) -> bool:
    empty = not state.db_query_output_list
    state.query_output_list_is_empty = TriFlag.of(empty)
    return empty


def inform_user_there_is_no_entity_in_db(state: InformationState) -> str:
    """Restate the inferred preferences and announce that nothing in the database matches."""
    if state.query_output_list_is_empty is not TriFlag.TRUE:
        raise ContractViolationError("query output is not known to be empty")
    summary = _preference_summary(state) or "(none)"
    message = f"Your preferences, as currently extracted, are: {summary}"
    if state.text_part.strip():
        message += f", with other constraints: {state.text_part.strip()}"
    message += (
        ". There are no entities in the database that are congruent to these preferences."
    )
    state.user_is_informed_there_is_no_entity_in_db = TriFlag.TRUE
    return message


def create_clarifying_question_queryoutput_is_empty_output_is_rejected(
    state: InformationState,
    db: EntityDatabase | None,
    suggestions_per_slot: int = DEFAULT_SUGGESTIONS_PER_SLOT,
    max_suggestion_items: int = MAX_SUGGESTION_ITEMS,
) -> str:
    """Proactively suggest nearby configurations with database support and invite changes."""
    if (
        state.query_output_list_is_empty is not TriFlag.TRUE
        and state.user_rejects_output is not TriFlag.TRUE
    ):
        raise ContractViolationError(
            "clarifying question requires an empty query output or a rejection"
        )
    if db is None:
        raise ConfigurationError("no database loaded for this session")
    filterable = set(state.extracted_information["filterable_captions"])
    current = {
        caption: value.normalized
        for caption, value in state.predefined_slots.items()
        if value is not None and caption in filterable
    }
    items = build_user_item_list(db, current, suggestions_per_slot, max_suggestion_items)
    if items:
        rendered = "; ".join(
            "(" + ", ".join(f"{c}: {v}" for c, v in item.slot_configuration.items()) + ")"
            for item in items
        )
        question = (
            f"Entities exist in the database for these configurations: {rendered}. "
            "Please change the predefined slots centered on the information provided."
        )
    else:
        question = "Please change your preferences so I can search again."
    state.utterance_to_update_predefined_slot = question
    return question


def prompt_more_constraints(state: InformationState) -> str:
    """Restate the current preferences and ask whether to add constraints."""
    summary = _preference_summary(state) or "(none yet)"
    message = f"The values are: {summary}."
    if state.text_part.strip():
        message += f" Other constraints noted: {state.text_part.strip()}."
    return message + " Are there any other constraints besides the ones already mentioned?"


class ReplyClassifier(Protocol):
    def __call__(self, reply: str) -> bool: ...


def classify_more_constraints(
    reply: str, classifier: ReplyClassifier
) -> tuple[bool, str]:
    """Decide whether the reply carries new constraints; keep it verbatim when it does."""
    try:
        has_more = bool(classifier(reply))
    except IstodError:
        raise
    except Exception as exc:
        raise MoveError("more-constraints classifier failed", diagnostic=repr(exc)) from exc
    return has_more, reply if has_more else ""


def entity_ranking(
    state: InformationState, ranker: Ranker | None = None
) -> tuple[list[EntityRecord], str]:
    """Reorder the retrieved entities by the text remainder and present them all.

    The presentation renders every entity's entire database row in a table and
    asks the user to accept or reject; that full-row rendering is what makes
    success equal inform downstream.
    """
    if not state.db_query_output_list:
        raise ContractViolationError("entity ranking requires a non-empty query output")
    if state.checked_there_is_no_other_constraint is not TriFlag.TRUE:
        raise ContractViolationError("entity ranking requires the more-constraints check")
    entities = list(state.db_query_output_list)
    ranker = ranker or lexical_rank
    try:
        ordered = list(ranker(entities, state.text_part))
        if sorted(e.row_index for e in ordered) != sorted(e.row_index for e in entities):
            raise ValueError("ranker did not return a permutation of its input")
    except Exception as exc:
        logger.warning("entity ranker failed (%s); keeping input order", exc)
        ordered = entities
    state.db_query_output_list = ordered
    columns = list(state.extracted_information["database_columns"])
    presentation = (
        "Certainly! Here is the information presented in a table format:\n"
        + render_entity_table(columns, ordered)
        + "\nPlease review the table and indicate if you would like to reject the "
        "retrieved items or not."
    )
    state.user_is_informed_of_db_output = TriFlag.TRUE
    return ordered, presentation


def check_if_user_rejects_output(
    state: InformationState, reply: str, classifier: ReplyClassifier
) -> bool:
    """Set user_rejects_output from the reply to the presented entity table."""
    if state.user_is_informed_of_db_output is not TriFlag.TRUE:
        raise ContractViolationError("no entity table has been presented yet")
    try:
        rejects = bool(classifier(reply))
    except IstodError:
        raise
    except Exception as exc:
        raise MoveError("rejection classifier failed", diagnostic=repr(exc)) from exc
    state.user_rejects_output = TriFlag.of(rejects)
    return rejects


def end_dialogue(state: InformationState) -> str:
    """Conclude the conversation; calling it again is a no-op with the same message."""
    state.dialogue_is_completed = TriFlag.TRUE
    return END_DIALOGUE_MESSAGE


def render_entity_table(columns: Sequence[str], records: Sequence[EntityRecord]) -> str:
    """Pipe-delimited table: one header row of column captions, one row per entity."""
    lines = [" | ".join(columns)]
    for record in records:
        lines.append(" | ".join(str(record.columns[c]) for c in columns))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Reply classifiers: a deterministic keyword/negation table plus an LLM variant
# ---------------------------------------------------------------------------

_TIME_RE = re.compile(r"\d{1,2}:\d{2}")

# Phrases that close the constraint-gathering exchange or merely request output.
CLOSING_MARKERS = (
    "that's all",
    "that is all",
    "that will be all",
    "that'll be all",
    "thats all",
    "all i need",
    "all i needed",
    "nothing else",
    "no more constraints",
    "no other constraint",
    "no other constraints",
    "no preference",
    "don't have a preference",
    "do not have a preference",
    "that's it",
    "that's everything",
    "thank you",
    "thanks",
    "recommend",
    "which one",
    "choose for me",
    "pick one",
)

# Vocabulary that signals the reply still carries preference content.
CONSTRAINT_CUES = (
    "book",
    "booking",
    "looking for",
    "should",
    "must",
    "prefer",
    "want",
    "also",
    "cheap",
    "expensive",
    "moderate",
    "free",
    "wifi",
    "internet",
    "parking",
    "star",
    "stars",
    "night",
    "nights",
    "people",
    "person",
    "guest",
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
    "north",
    "south",
    "east",
    "west",
    "centre",
    "center",
)

REJECTION_MARKERS = (
    "reject",
    "rejected",
    "none of these",
    "none of those",
    "not these",
    "neither",
    "don't like",
    "do not like",
    "something else",
    "something different",
    "no good",
    "not good",
    "not satisfied",
    "not what i",
    "another option",
    "other options",
    "don't want these",
    "do not want these",
    "show me something else",
)


def _normalized_phrase(text: str) -> str:
    return " " + " ".join(tokenize(text)) + " "


def _contains_any(reply: str, markers: Sequence[str]) -> bool:
    haystack = _normalized_phrase(reply)
    for marker in markers:
        needle = " ".join(tokenize(marker))
        if needle and f" {needle} " in haystack:
            return True
    return False


def rule_more_constraints_classifier(reply: str) -> bool:
    """Keyword table: constraint vocabulary wins over closing phrases; unknown text passes through."""
    if not reply.strip():
        return False
    if _contains_any(reply, CONSTRAINT_CUES) or _TIME_RE.search(reply):
        return True
    if _contains_any(reply, CLOSING_MARKERS):
        return False
    return True


def rule_rejection_classifier(reply: str) -> bool:
    """Rejecting only on explicit rejection vocabulary; anything else accepts."""
    if not reply.strip():
        return False
    return _contains_any(reply, REJECTION_MARKERS)


class LanguageModelReplyClassifier:
    """Yes/no classification via a completion backend."""

    def __init__(self, backend, question: str):
        self.backend = backend
        self.question = question

    def __call__(self, reply: str) -> bool:
        prompt = (
            f"{self.question}\nUser reply: '{reply}'\n"
            "Answer with exactly one word, yes or no."
        )
        answer = self.backend.complete(prompt).strip().lower()
        if answer.startswith("yes"):
            return True
        if answer.startswith("no"):
            return False
        raise MoveError("classifier returned neither yes nor no", diagnostic=answer[:200])


MORE_CONSTRAINTS_QUESTION = (
    "Decide whether the user's reply contains additional constraints or preferences "
    "for the search, rather than closing the exchange or asking for the results."
)
REJECTION_QUESTION = (
    "Decide whether the user's reply rejects the list of entities that was just presented."
)


def language_model_more_constraints_classifier(backend) -> ReplyClassifier:
    return LanguageModelReplyClassifier(backend, MORE_CONSTRAINTS_QUESTION)


def language_model_rejection_classifier(backend) -> ReplyClassifier:
    return LanguageModelReplyClassifier(backend, REJECTION_QUESTION)
