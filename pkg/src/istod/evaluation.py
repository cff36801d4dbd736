"""Scripted replay of test conversations and task-completion scoring.

Replay feeds each conversation's user utterances to a fresh session and stops
at completion or script exhaustion. The labeled goal is the annotated dialogue
state at the last consumed user turn. Inform uses no-contradiction semantics:
slots present in both maps must agree (a strict-equality mode exists behind a
flag), and every presented entity must satisfy the extracted filterable slots.
Because presentation always renders full database rows, success reduces to
inform, which the harness checks as an identity.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .database import EntityRecord
from .errors import EvalError
from .ingest import DomainDictionary, RawConversation
from .state import normalize_value
from .strategy import Session, run_scripted

logger = logging.getLogger(__name__)

DONTCARE = "dontcare"


@dataclass
class ReplayReport:
    """Outcome of replaying one conversation against the engine."""

    conversation_id: str
    consumed_count: int
    extracted_slots: dict[str, str]
    labeled_goal: dict[str, tuple[str, ...]]
    informed: bool
    succeeded: bool
    transcript: tuple[tuple[str, str], ...]
    completed: bool = True
    presented_entities: tuple[EntityRecord, ...] = ()
    presented_columns: tuple[str, ...] = ()
    database_columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class ScoreSummary:
    inform_rate: float
    success_rate: float
    updated_combined: float

    @classmethod
    def from_rates(cls, inform_rate: float, success_rate: float) -> "ScoreSummary":
        return cls(inform_rate, success_rate, (inform_rate + success_rate) / 2)


def labeled_goal(conversation: RawConversation, consumed_count: int) -> dict[str, tuple[str, ...]]:
    """The annotated dialogue state at the last consumed user turn, normalized."""
    user_turns = conversation.user_turns
    if not 1 <= consumed_count <= len(user_turns):
        raise EvalError(
            f"{conversation.id}: consumed {consumed_count} of {len(user_turns)} user turns"
        )
    domain = conversation.domain
    turn = user_turns[consumed_count - 1]
    state = turn.states.get(domain)
    if state is None:
        raise EvalError(f"{conversation.id}: user turn {consumed_count} has no state annotation")
    return {
        caption: tuple(normalize_value(v, caption) for v in values)
        for caption, values in state.items()
    }


def _goal_matches(extracted: str, goal_values: tuple[str, ...], caption: str) -> bool:
    if DONTCARE in goal_values:
        return True
    return normalize_value(extracted, caption) in goal_values


def inform_verdict(
    extracted: Mapping[str, str],
    goal: Mapping[str, tuple[str, ...] | str],
    *,
    presented: Sequence[EntityRecord] = (),
    filterable: Iterable[str] = (),
    strict: bool = False,
) -> bool:
    """No-contradiction check between the extracted slots and the labeled goal.

    True iff every slot present in both maps agrees on normalized values and
    every presented entity satisfies the extracted filterable slots. A goal
    value of "dontcare" matches anything. In strict mode every goal slot must
    also have been extracted.
    """
    goal_normalized: dict[str, tuple[str, ...]] = {}
    for caption, values in goal.items():
        if isinstance(values, str):
            values = (values,)
        goal_normalized[caption] = tuple(normalize_value(v, caption) for v in values)
    for caption, values in goal_normalized.items():
        if caption in extracted:
            if not _goal_matches(extracted[caption], values, caption):
                return False
        elif strict and DONTCARE not in values:
            return False
    filterable = set(filterable)
    for record in presented:
        for caption, value in extracted.items():
            if caption not in filterable or caption not in record.columns:
                continue
            if normalize_value(str(record.columns[caption]), caption) != normalize_value(
                value, caption
            ):
                return False
    return True


def success_verdict(report: ReplayReport) -> bool:
    """Informed, and the presented table carried every database column for every entity.

    Full-row presentation makes every requestable attribute necessarily
    present, so success holds exactly when inform does.
    """
    if not report.informed:
        return False
    expected = set(report.database_columns)
    if set(report.presented_columns) != expected:
        return False
    for record in report.presented_entities:
        if set(record.columns) != expected:
            return False
    return True


def replay_conversation(
    conversation: RawConversation,
    dictionary: DomainDictionary,
    *,
    session_factory: Callable[[], Session] | None = None,
    goal_override: Mapping[str, Sequence[str]] | None = None,
    strict: bool = False,
) -> ReplayReport:
    """Replay one conversation's user utterances and score the result."""
    utterances = [t.utterance for t in conversation.user_turns]
    if not utterances:
        raise EvalError(f"{conversation.id}: conversation has no user turns")
    session = session_factory() if session_factory else dictionary.new_session()
    outcome = run_scripted(session, utterances)
    state = outcome.state
    extracted = state.slot_map()
    if goal_override is not None:
        goal = {
            caption.split("-", 1)[1] if "-" in caption else caption: tuple(
                normalize_value(v, caption) for v in values
            )
            for caption, values in goal_override.items()
        }
    else:
        goal = labeled_goal(conversation, outcome.consumed_count)
    presented = (
        tuple(state.db_query_output_list) if state.user_is_informed_of_db_output else ()
    )
    informed = bool(presented) and inform_verdict(
        extracted,
        goal,
        presented=presented,
        filterable=dictionary.schema.filterable_captions,
        strict=strict,
    )
    report = ReplayReport(
        conversation_id=conversation.id,
        consumed_count=outcome.consumed_count,
        extracted_slots=extracted,
        labeled_goal=goal,
        informed=informed,
        succeeded=False,
        transcript=outcome.transcript,
        completed=outcome.completed,
        presented_entities=presented,
        presented_columns=dictionary.database.columns if presented else (),
        database_columns=dictionary.database.columns,
    )
    report.succeeded = success_verdict(report)
    return report


def replay_conversations(
    conversations: Iterable[RawConversation],
    dictionaries: Mapping[str, DomainDictionary],
    *,
    goal_overrides: Mapping[str, Mapping[str, Sequence[str]]] | None = None,
    strict: bool = False,
) -> list[ReplayReport]:
    reports = []
    overrides = goal_overrides or {}
    for conversation in conversations:
        dictionary = dictionaries.get(conversation.domain)
        if dictionary is None:
            raise EvalError(f"{conversation.id}: no dictionary for {conversation.domain!r}")
        reports.append(
            replay_conversation(
                conversation,
                dictionary,
                goal_override=overrides.get(conversation.id),
                strict=strict,
            )
        )
    return reports


def summarize(reports: Sequence[ReplayReport]) -> ScoreSummary:
    """Inform/success percentages over the replayed conversations."""
    if not reports:
        raise EvalError("cannot summarize an empty report set")
    informed = sum(1 for r in reports if r.informed)
    succeeded = sum(1 for r in reports if r.succeeded)
    return ScoreSummary.from_rates(
        100.0 * informed / len(reports), 100.0 * succeeded / len(reports)
    )


# ---------------------------------------------------------------------------
# Re-scoring of external prediction files
# ---------------------------------------------------------------------------


def _final_predicted_state(turns: Sequence[Mapping[str, Any]], domain: str) -> dict[str, str]:
    state: Mapping[str, Any] = {}
    for turn in turns:
        if "state" in turn:
            state = turn["state"]
    if domain in state and isinstance(state[domain], Mapping):
        state = state[domain]
    flat: dict[str, str] = {}
    for caption, value in state.items():
        caption = caption.split("-", 1)[1] if "-" in caption else caption
        if isinstance(value, (list, tuple)):
            value = value[0] if value else ""
        if value in (None, "", "none"):
            continue
        flat[caption] = str(value)
    return flat


def score_predictions(
    prediction_path: str | Path,
    conversations: Sequence[RawConversation],
) -> tuple[ScoreSummary, list[ReplayReport]]:
    """Score an external model's per-turn prediction file on the filtered subset.

    The file maps each dialogue id (with or without the ``.json`` suffix,
    case-insensitive) to its list of per-turn predictions carrying a ``state``
    map. Inform compares the final predicted state against the goal at the last
    user turn; prediction files carry no presentation, so success mirrors
    inform. Conversations without a prediction entry are reported as errors.
    """
    path = Path(prediction_path)
    if not path.exists():
        raise EvalError(f"prediction file not found: {path}")
    raw = json.loads(path.read_text("utf-8"))
    by_id = {str(k).lower().removesuffix(".json"): v for k, v in raw.items()}
    reports = []
    missing = []
    for conversation in conversations:
        key = conversation.id.lower().removesuffix(".json")
        if key not in by_id:
            missing.append(conversation.id)
            continue
        extracted = _final_predicted_state(by_id[key], conversation.domain)
        goal = labeled_goal(conversation, len(conversation.user_turns))
        informed = inform_verdict(extracted, goal)
        reports.append(
            ReplayReport(
                conversation_id=conversation.id,
                consumed_count=len(conversation.user_turns),
                extracted_slots=extracted,
                labeled_goal=goal,
                informed=informed,
                succeeded=informed,
                transcript=(),
                completed=True,
            )
        )
    if missing:
        logger.warning("no predictions for %d conversations: %s", len(missing), missing[:5])
    if not reports:
        raise EvalError("prediction file matched none of the conversations")
    return summarize(reports), reports


def render_report(reports: Sequence[ReplayReport], summary: ScoreSummary) -> str:
    """Structured text report: one row per conversation plus the summary block."""
    lines = ["conversation_id | consumed | completed | informed | succeeded"]
    for r in reports:
        lines.append(
            f"{r.conversation_id} | {r.consumed_count} | {str(r.completed).lower()} | "
            f"{str(r.informed).lower()} | {str(r.succeeded).lower()}"
        )
    lines.append("")
    lines.append(f"inform: {summary.inform_rate:.1f}")
    lines.append(f"success: {summary.success_rate:.1f}")
    lines.append(f"updated_combined: {summary.updated_combined:.2f}")
    return "\n".join(lines)
