"""Update strategy: the phase loop that picks and executes dialogue moves.

The control policy is a blocking loop in its original form; here control is
inverted into ``advance``, which runs phases until the conversation either
needs user input or completes, so one state machine serves the CLI, the HTTP
API and scripted replay. Flag assignments, including the deliberately literal
corner cases (``checked_there_is_no_other_constraint`` being set true even
when the user adds constraints, and the never-reset wrongness-within-other-
constraints marker), are applied exactly as the control policy defines them.
"""

from __future__ import annotations

import enum
import hashlib
import json
import uuid
from dataclasses import dataclass, field
from typing import Sequence

from . import moves
from .database import EntityDatabase
from .errors import ContractViolationError, ProtocolError
from .moves import MoveOutcome, ReplyClassifier
from .nlu import Extractor, ExtractorHints, RuleBasedExtractor
from .retrieval import Ranker, lexical_rank
from .state import (
    FLAG_COMPONENTS,
    DomainSchema,
    InformationState,
    TriFlag,
    new_information_state,
    state_to_json,
)

UPDATING_PREFERENCES_NOTICE = (
    "I am updating your preferences based on the entered constraints. "
    "Please wait a moment while I process the changes."
)

_MAX_PHASES_PER_DELIVERY = 32


class PendingInput(enum.Enum):
    """Which consumer the next user utterance is destined for."""

    UPDATE_INPUT = "update_input"
    MORE_CONSTRAINTS_REPLY = "more_constraints_reply"
    REJECT_REPLY = "reject_reply"


@dataclass(frozen=True)
class MoveTraceEntry:
    cycle: int
    phase: int
    move: str
    flags_digest: str


@dataclass(frozen=True)
class TurnResult:
    """What one advance produced: the TOD utterance and where the session stands."""

    tod_utterance: str
    awaiting_input: bool
    completed: bool
    final_slots: dict[str, str] | None = None

    def __post_init__(self) -> None:
        if self.completed and self.awaiting_input:
            raise ContractViolationError("a completed turn cannot await input")
        if self.completed != (self.final_slots is not None):
            raise ContractViolationError("final slots are present exactly on completion")


@dataclass
class Session:
    """One conversation: information state, transcript and move trace."""

    id: str
    schema: DomainSchema
    database: EntityDatabase
    state: InformationState
    extractor: Extractor
    more_classifier: ReplyClassifier
    reject_classifier: ReplyClassifier
    ranker: Ranker
    transcript: list[tuple[str, str]] = field(default_factory=list)
    move_trace: list[MoveTraceEntry] = field(default_factory=list)
    move_outcomes: list[MoveOutcome] = field(default_factory=list)
    pending: PendingInput | None = PendingInput.UPDATE_INPUT
    cycle: int = 0
    phase: int = 0
    suggestions_per_slot: int = 3
    max_suggestion_items: int = 6

    @property
    def completed(self) -> bool:
        return self.state.dialogue_is_completed is TriFlag.TRUE


def new_session(
    schema: DomainSchema,
    database: EntityDatabase,
    *,
    hints: ExtractorHints | None = None,
    extractor: Extractor | None = None,
    more_classifier: ReplyClassifier | None = None,
    reject_classifier: ReplyClassifier | None = None,
    ranker: Ranker | None = None,
    session_id: str | None = None,
    suggestions_per_slot: int = 3,
    max_suggestion_items: int = 6,
) -> Session:
    """Open a session; the transcript starts with the initial input prompt."""
    state = new_information_state(schema, database)
    session = Session(
        id=session_id or uuid.uuid4().hex,
        schema=schema,
        database=database,
        state=state,
        extractor=extractor or RuleBasedExtractor(schema, hints),
        more_classifier=more_classifier or moves.rule_more_constraints_classifier,
        reject_classifier=reject_classifier or moves.rule_rejection_classifier,
        ranker=ranker or lexical_rank,
        suggestions_per_slot=suggestions_per_slot,
        max_suggestion_items=max_suggestion_items,
    )
    session.transcript.append(("tod", state.utterance_to_update_predefined_slot))
    return session


def _flags_digest(state: InformationState) -> str:
    payload = json.dumps({f: getattr(state, f).value for f in FLAG_COMPONENTS}, sort_keys=True)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


def _run_move(
    session: Session,
    name: str,
    fn,
    *,
    utterance: str | None = None,
    awaiting_user: bool = False,
):
    before = {f: getattr(session.state, f) for f in FLAG_COMPONENTS}
    result = fn()
    deltas = tuple(
        (f, getattr(session.state, f).value)
        for f in FLAG_COMPONENTS
        if getattr(session.state, f) is not before[f]
    )
    session.phase += 1
    session.move_trace.append(
        MoveTraceEntry(session.cycle, session.phase, name, _flags_digest(session.state))
    )
    text = utterance
    if text is None and isinstance(result, str):
        text = result
    if text is None and isinstance(result, tuple) and result and isinstance(result[-1], str):
        text = result[-1]
    session.move_outcomes.append(
        MoveOutcome(tod_utterance=text, awaiting_user=awaiting_user, state_deltas=deltas)
    )
    return result


def _say(session: Session, text: str, emitted: list[str]) -> None:
    session.transcript.append(("tod", text))
    emitted.append(text)


def _pause(
    session: Session, kind: PendingInput, prompt: str, emitted: list[str]
) -> TurnResult:
    session.pending = kind
    _say(session, prompt, emitted)
    return TurnResult("\n".join(emitted), awaiting_input=True, completed=False)


def _snapshot(session: Session) -> dict:
    return {
        "state": state_to_json(session.state),
        "pending": session.pending,
        "transcript_len": len(session.transcript),
        "trace_len": len(session.move_trace),
        "cycle": session.cycle,
        "phase": session.phase,
    }


def _restore(session: Session, snap: dict) -> None:
    session.state = InformationState.from_snapshot(json.loads(snap["state"]))
    session.pending = snap["pending"]
    del session.transcript[snap["transcript_len"] :]
    del session.move_trace[snap["trace_len"] :]
    del session.move_outcomes[snap["trace_len"] :]
    session.cycle = snap["cycle"]
    session.phase = snap["phase"]


def advance(session: Session, user_input: str | None = None) -> TurnResult:
    """Feed one user utterance and execute phases until input is needed or done.

    Protocol: the session always awaits input unless completed, so input is
    required on every call; calling a completed session, or calling without
    input, is a usage error. On a move error the session is restored to the
    last phase boundary (the previous await point) and the error propagates.
    """
    return _deliver(session, user_input, count_input=True)


def _deliver(session: Session, user_input: str | None, *, count_input: bool) -> TurnResult:
    if session.completed:
        raise ProtocolError("session is completed; no further input is accepted")
    if session.pending is None:
        raise ProtocolError("session is not awaiting input")
    if user_input is None:
        raise ProtocolError("session awaits user input but none was given")
    snap = _snapshot(session)
    try:
        return _deliver_unprotected(session, user_input, count_input=count_input)
    except Exception:
        _restore(session, snap)
        raise


def _deliver_unprotected(session: Session, user_input: str, *, count_input: bool) -> TurnResult:
    state = session.state
    pending = session.pending
    session.pending = None
    if count_input:
        session.transcript.append(("user", user_input))
        state.user_utterance_index += 1
        session.cycle += 1
        session.phase = 0
    emitted: list[str] = []

    if pending is PendingInput.UPDATE_INPUT:
        _block1(session, user_input)
    elif pending is PendingInput.MORE_CONSTRAINTS_REPLY:
        _finish_block2(session, user_input)
    elif pending is PendingInput.REJECT_REPLY:
        _finish_block3(session, user_input)
    return _loop(session, emitted)


def _block1(session: Session, inp: str) -> None:
    """Preference update, wrongness check, clarify-or-proceed; literal flag resets."""
    state = session.state
    state.user_is_informed_there_is_no_entity_in_db = TriFlag.UNSET
    outcome = _run_move(
        session,
        "update_user_preferences",
        lambda: moves.update_user_preferences(state, inp, session.extractor),
        utterance=None,
    )
    out_check = _run_move(
        session,
        "check_is_there_wrong_or_out_of_main_value",
        lambda: moves.check_is_there_wrong_or_out_of_main_value(state, outcome),
    )
    state.there_is_wrong_or_out_of_domain_value = TriFlag.of(out_check)
    state.it_is_required_to_query_database = TriFlag.of(not out_check)
    state.it_is_required_to_update_predefined_slots = TriFlag.UNSET
    if state.there_is_wrong_or_out_of_domain_value:
        _run_move(
            session,
            "create_clarifying_question_input_is_wrong_or_out_of_domain",
            lambda: moves.create_clarifying_question_input_is_wrong_or_out_of_domain(state),
        )
        state.it_is_required_to_update_predefined_slots = TriFlag.TRUE
        if state.user_other_constraints != "":
            state.wrongness_within_other_constraints_checked = TriFlag.TRUE
        state.there_is_wrong_or_out_of_domain_value = TriFlag.UNSET
        state.wrong_or_out_of_domain_values_list = []
    else:
        state.it_is_required_to_update_predefined_slots = TriFlag.UNSET
        state.it_is_required_to_query_database = TriFlag.TRUE
    state.there_is_wrong_or_out_of_domain_value = TriFlag.UNSET
    state.wrong_or_out_of_domain_values_list = []


def _finish_block2(session: Session, reply: str) -> None:
    """Classify the more-constraints reply and apply the literal end-of-block resets."""
    state = session.state
    has_more, constraints = moves.classify_more_constraints(reply, session.more_classifier)
    if has_more:
        state.user_other_constraints = constraints
        # The stored prompt is surfaced as a plain line when the constraints
        # are consumed; storing the notice here makes that line an updating
        # notice instead of a repeat of the last question.
        state.utterance_to_update_predefined_slot = UPDATING_PREFERENCES_NOTICE
    state.checked_there_is_no_other_constraint = TriFlag.of(not has_more)
    if not state.checked_there_is_no_other_constraint:
        state.it_is_required_to_update_predefined_slots = TriFlag.TRUE
        state.checked_there_is_no_other_constraint = TriFlag.TRUE
    state.query_output_list_is_empty = TriFlag.UNSET
    state.it_is_required_to_query_database = TriFlag.UNSET


def _finish_block3(session: Session, reply: str) -> None:
    """Rejection check: clarify and loop, or mark the dialogue completed."""
    state = session.state
    _run_move(
        session,
        "check_if_user_rejects_output",
        lambda: moves.check_if_user_rejects_output(state, reply, session.reject_classifier),
    )
    if state.user_rejects_output:
        _run_move(
            session,
            "create_clarifying_question_queryoutput_is_empty_output_is_rejected",
            lambda: moves.create_clarifying_question_queryoutput_is_empty_output_is_rejected(
                state,
                session.database,
                session.suggestions_per_slot,
                session.max_suggestion_items,
            ),
        )
        state.it_is_required_to_update_predefined_slots = TriFlag.TRUE
    else:
        state.dialogue_is_completed = TriFlag.TRUE
    state.user_rejects_output = TriFlag.UNSET
    state.checked_there_is_no_other_constraint = TriFlag.UNSET
    state.user_other_constraints = ""


def _loop(session: Session, emitted: list[str]) -> TurnResult:
    state = session.state
    for _ in range(_MAX_PHASES_PER_DELIVERY):
        if state.dialogue_is_completed:
            return _complete(session, emitted)

        if state.it_is_required_to_update_predefined_slots:
            if (
                state.user_other_constraints != ""
                and not state.wrongness_within_other_constraints_checked
            ):
                _say(session, state.utterance_to_update_predefined_slot, emitted)
                _block1(session, state.user_other_constraints)
                # Consume-once: without this clear the stored constraints would be
                # re-read forever when their query comes back empty, breaking the
                # per-cycle termination bound. Cleared only after the wrongness
                # check inside the block has seen where the input came from.
                state.user_other_constraints = ""
            else:
                return _pause(
                    session,
                    PendingInput.UPDATE_INPUT,
                    state.utterance_to_update_predefined_slot,
                    emitted,
                )

        if state.it_is_required_to_query_database:
            _run_move(
                session,
                "query_database",
                lambda: moves.query_database(state, session.database),
            )
            _run_move(
                session,
                "check_the_emptiness_of_query_output",
                lambda: moves.check_the_emptiness_of_query_output(state),
            )
            if state.query_output_list_is_empty:
                message = _run_move(
                    session,
                    "inform_user_there_is_no_entity_in_db",
                    lambda: moves.inform_user_there_is_no_entity_in_db(state),
                )
                _say(session, message, emitted)
                _run_move(
                    session,
                    "create_clarifying_question_queryoutput_is_empty_output_is_rejected",
                    lambda: moves.create_clarifying_question_queryoutput_is_empty_output_is_rejected(
                        state,
                        session.database,
                        session.suggestions_per_slot,
                        session.max_suggestion_items,
                    ),
                )
                state.it_is_required_to_update_predefined_slots = TriFlag.TRUE
                state.query_output_list_is_empty = TriFlag.UNSET
                state.it_is_required_to_query_database = TriFlag.UNSET
            else:
                prompt = moves.prompt_more_constraints(state)
                _run_move(
                    session,
                    "check_if_the_user_wants_to_enter_more_constraints",
                    lambda: None,
                    utterance=prompt,
                    awaiting_user=True,
                )
                return _pause(session, PendingInput.MORE_CONSTRAINTS_REPLY, prompt, emitted)

        if (
            state.it_is_required_to_update_predefined_slots.is_unset
            and state.checked_there_is_no_other_constraint
        ):
            state.user_other_constraints = ""
            _, presentation = _run_move(
                session,
                "entity_ranking",
                lambda: moves.entity_ranking(state, session.ranker),
                utterance=None,
                awaiting_user=True,
            )
            return _pause(session, PendingInput.REJECT_REPLY, presentation, emitted)

    raise ContractViolationError("update strategy made no progress; aborting the phase loop")


def _complete(session: Session, emitted: list[str]) -> TurnResult:
    state = session.state
    message = _run_move(session, "end_dialogue", lambda: moves.end_dialogue(state))
    _say(session, message, emitted)
    final = state.slot_map()
    summary = ", ".join(f"{c}: {v}" for c, v in final.items()) or "(none)"
    _say(session, f"Predefined slots: {summary}", emitted)
    session.pending = None
    return TurnResult(
        "\n".join(emitted), awaiting_input=False, completed=True, final_slots=final
    )


@dataclass(frozen=True)
class ScriptOutcome:
    """Result of replaying a fixed utterance list against one session."""

    transcript: tuple[tuple[str, str], ...]
    consumed_count: int
    state: InformationState
    completed: bool


def run_scripted(session: Session, utterances: Sequence[str]) -> ScriptOutcome:
    """Feed scripted utterances whenever the session awaits input.

    Stops at completion or when the script runs out. One asymmetry mirrors the
    replay setting this serves: if the script is exhausted exactly at the
    entity-table rejection prompt, silence counts as acceptance (an empty,
    uncounted reply is delivered), because scripted users have nothing left to
    say once every constraint was consumed.
    """
    if not utterances:
        raise ContractViolationError("a scripted run needs at least one utterance")
    consumed = 0
    while not session.completed:
        if consumed < len(utterances):
            advance(session, utterances[consumed])
            consumed += 1
        else:
            accept_silently(session)
            break
    return ScriptOutcome(
        transcript=tuple(session.transcript),
        consumed_count=consumed,
        state=session.state,
        completed=session.completed,
    )


def accept_silently(session: Session) -> TurnResult | None:
    """Treat having nothing more to say at the rejection prompt as acceptance.

    Delivers an empty, uncounted reply when (and only when) the session is
    paused on the entity-table rejection question; returns None at any other
    pause point.
    """
    if session.pending is not PendingInput.REJECT_REPLY:
        return None
    return _deliver(session, "", count_input=False)


def export_trace(session: Session) -> list[str]:
    """Line-oriented trace: one line per phase with a digest of the flag snapshot."""
    return [
        f"cycle={e.cycle} phase={e.phase} move={e.move} flags={e.flags_digest}"
        for e in session.move_trace
    ]


def session_snapshot(session: Session) -> dict:
    """Full session snapshot: information state, transcript and move trace."""
    return {
        "session_id": session.id,
        "domain": session.state.domain_caption,
        "pending": session.pending.value if session.pending else None,
        "completed": session.completed,
        "state": session.state.to_snapshot(),
        "transcript": [[speaker, text] for speaker, text in session.transcript],
        "move_trace": [
            [entry.cycle, entry.phase, entry.move, entry.flags_digest]
            for entry in session.move_trace
        ],
    }


def session_to_json(session: Session) -> str:
    """Canonical serialization; the HTTP API returns these exact bytes."""
    return json.dumps(session_snapshot(session), ensure_ascii=False, separators=(",", ":"))


def flag_hygiene_violations(session: Session) -> list[str]:
    """Check the end-of-block flag resets appropriate to the session's pause point."""
    state = session.state
    problems: list[str] = []

    def expect_unset(name: str) -> None:
        if not getattr(state, name).is_unset:
            problems.append(f"{name} should be unset, found {getattr(state, name).value}")

    expect_unset("there_is_wrong_or_out_of_domain_value")
    if state.wrong_or_out_of_domain_values_list:
        problems.append("wrong_or_out_of_domain_values_list should be cleared")
    if session.pending is not PendingInput.MORE_CONSTRAINTS_REPLY:
        # After a wrong-value pass the query flag is literally assigned false and
        # the skipped query block never resets it, so only true is a violation.
        if state.it_is_required_to_query_database is TriFlag.TRUE:
            problems.append("it_is_required_to_query_database should not hold between turns")
        expect_unset("query_output_list_is_empty")
    expect_unset("user_rejects_output")
    if session.pending is PendingInput.REJECT_REPLY:
        if state.checked_there_is_no_other_constraint is not TriFlag.TRUE:
            problems.append("checked_there_is_no_other_constraint should hold at presentation")
        if state.user_other_constraints != "":
            problems.append("user_other_constraints should be cleared at presentation")
    if session.completed:
        expect_unset("checked_there_is_no_other_constraint")
        if state.user_other_constraints != "":
            problems.append("user_other_constraints should be cleared at completion")
    return problems
