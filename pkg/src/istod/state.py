"""Information state: components, tri-valued flags, initialization and value normalization.

The state is the mutable record every other module reads and writes: a slot
map plus a free-text remainder for user preferences, and the control flags the
update strategy branches on. The immutable per-domain dictionary (schema and
database summary) is attached once at session start and never changes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping

from .database import EntityDatabase, EntityRecord
from .errors import ConfigurationError
from .lexicon import NUMBER_WORDS, tokenize


class TriFlag(enum.Enum):
    """Three-valued flag: the control loop distinguishes unset from false.

    Truthiness means "is true", so ``if flag:`` reads like the control rules
    it implements; unset must be tested explicitly via ``is_unset``.
    """

    TRUE = "true"
    FALSE = "false"
    UNSET = "unset"

    def __bool__(self) -> bool:
        return self is TriFlag.TRUE

    @property
    def is_unset(self) -> bool:
        return self is TriFlag.UNSET

    @property
    def is_false(self) -> bool:
        return self is TriFlag.FALSE

    @classmethod
    def of(cls, value: "bool | None | TriFlag") -> "TriFlag":
        if isinstance(value, TriFlag):
            return value
        if value is None:
            return cls.UNSET
        return cls.TRUE if value else cls.FALSE


@dataclass(frozen=True)
class SlotValue:
    """A slot configuration as entered and in comparable normalized form."""

    raw: str
    normalized: str


@dataclass(frozen=True)
class SlotSpec:
    """One predefined slot: caption, characterization and permitted configurations.

    An empty permitted list means the slot is unconstrained. ``filterable``
    marks slots backed by a database column (booking-only slots are not).
    ``skip_extraction`` excludes the slot from preference extraction; used for
    the hotel type slot whose caption collides with the domain caption.
    """

    caption: str
    characterization: str
    permitted_configurations: tuple[str, ...] = ()
    filterable: bool = False
    skip_extraction: bool = False

    @property
    def constrained(self) -> bool:
        return bool(self.permitted_configurations)


@dataclass(frozen=True)
class DomainSchema:
    """Ordered slot specifications for one domain."""

    domain_caption: str
    slots: tuple[SlotSpec, ...]

    def __post_init__(self) -> None:
        captions = [s.caption for s in self.slots]
        if len(set(captions)) != len(captions):
            dupes = sorted({c for c in captions if captions.count(c) > 1})
            raise ConfigurationError(
                f"duplicate slot captions in domain {self.domain_caption!r}: {dupes}"
            )

    @property
    def captions(self) -> tuple[str, ...]:
        return tuple(s.caption for s in self.slots)

    def slot(self, caption: str) -> SlotSpec:
        for spec in self.slots:
            if spec.caption == caption:
                return spec
        raise ConfigurationError(f"unknown slot {caption!r} in domain {self.domain_caption!r}")

    def has_slot(self, caption: str) -> bool:
        return any(s.caption == caption for s in self.slots)

    @property
    def filterable_captions(self) -> tuple[str, ...]:
        return tuple(s.caption for s in self.slots if s.filterable)


def _caption_affixes(caption: str) -> set[str]:
    affixes = {caption, caption + "s"}
    if caption.endswith("s"):
        affixes.add(caption[:-1])
    return affixes


def normalize_value(raw: str, slot: SlotSpec | str | None = None) -> str:
    """Normalize a slot configuration for comparison.

    Lowercases, trims, strips punctuation, drops leading/trailing occurrences
    of the slot caption (with naive singular/plural variants) and maps
    standalone number words zero through ten to digits. Total and idempotent.
    """
    tokens = tokenize(raw)
    if slot is not None:
        caption = slot.caption if isinstance(slot, SlotSpec) else slot
        affixes = _caption_affixes(caption.lower())
        while tokens and tokens[0] in affixes:
            tokens = tokens[1:]
        while tokens and tokens[-1] in affixes:
            tokens = tokens[:-1]
    tokens = [NUMBER_WORDS.get(t, t) for t in tokens]
    return " ".join(tokens)


# Tri-valued control components, in the order they are serialized.
FLAG_COMPONENTS = (
    "it_is_required_to_update_predefined_slots",
    "it_is_required_to_query_database",
    "query_output_list_is_empty",
    "dialogue_is_completed",
    "checked_there_is_no_other_constraint",
    "user_rejects_output",
    "there_is_wrong_or_out_of_domain_value",
    "wrongness_within_other_constraints_checked",
    "user_is_informed_there_is_no_entity_in_db",
    "user_is_informed_of_db_output",
)

# The prompt shown before the first user utterance is consumed.
INITIAL_INPUT_PROMPT = "enter query"


@dataclass
class InformationState:
    """The full mid-conversation record: slot map, text remainder and control flags."""

    domain_caption: str
    predefined_slots: dict[str, SlotValue | None]
    extracted_information: Mapping[str, Any]
    text_part: str = ""
    it_is_required_to_update_predefined_slots: TriFlag = TriFlag.UNSET
    it_is_required_to_query_database: TriFlag = TriFlag.UNSET
    db_query_output_list: list[EntityRecord] = field(default_factory=list)
    query_output_list_is_empty: TriFlag = TriFlag.UNSET
    dialogue_is_completed: TriFlag = TriFlag.UNSET
    utterance_to_update_predefined_slot: str = INITIAL_INPUT_PROMPT
    checked_there_is_no_other_constraint: TriFlag = TriFlag.UNSET
    user_rejects_output: TriFlag = TriFlag.UNSET
    there_is_wrong_or_out_of_domain_value: TriFlag = TriFlag.UNSET
    wrong_or_out_of_domain_values_list: list[tuple[str, str]] = field(default_factory=list)
    user_utterance_index: int = 0
    user_other_constraints: str = ""
    wrongness_within_other_constraints_checked: TriFlag = TriFlag.UNSET
    user_is_informed_there_is_no_entity_in_db: TriFlag = TriFlag.UNSET
    user_is_informed_of_db_output: TriFlag = TriFlag.UNSET

    def slot_map(self, *, normalized: bool = True) -> dict[str, str]:
        """Non-none slot configurations as a plain mapping."""
        return {
            caption: (value.normalized if normalized else value.raw)
            for caption, value in self.predefined_slots.items()
            if value is not None
        }

    def flags(self) -> dict[str, TriFlag]:
        return {name: getattr(self, name) for name in FLAG_COMPONENTS}

    def to_snapshot(self) -> dict[str, Any]:
        """Plain-data snapshot with stable field names, suitable for JSON."""
        return {
            "predefined_slots": {
                caption: (
                    None if value is None else {"raw": value.raw, "normalized": value.normalized}
                )
                for caption, value in self.predefined_slots.items()
            },
            "text_part": self.text_part,
            "it_is_required_to_update_predefined_slots": self.it_is_required_to_update_predefined_slots.value,
            "it_is_required_to_query_database": self.it_is_required_to_query_database.value,
            "db_query_output_list": [
                {"columns": dict(record.columns), "row_index": record.row_index}
                for record in self.db_query_output_list
            ],
            "query_output_list_is_empty": self.query_output_list_is_empty.value,
            "dialogue_is_completed": self.dialogue_is_completed.value,
            "utterance_to_update_predefined_slot": self.utterance_to_update_predefined_slot,
            "checked_there_is_no_other_constraint": self.checked_there_is_no_other_constraint.value,
            "user_rejects_output": self.user_rejects_output.value,
            "there_is_wrong_or_out_of_domain_value": self.there_is_wrong_or_out_of_domain_value.value,
            "wrong_or_out_of_domain_values_list": [
                [caption, raw] for caption, raw in self.wrong_or_out_of_domain_values_list
            ],
            "user_utterance_index": self.user_utterance_index,
            "user_other_constraints": self.user_other_constraints,
            "wrongness_within_other_constraints_checked": self.wrongness_within_other_constraints_checked.value,
            "user_is_informed_there_is_no_entity_in_db": self.user_is_informed_there_is_no_entity_in_db.value,
            "user_is_informed_of_db_output": self.user_is_informed_of_db_output.value,
            "domain_caption": self.domain_caption,
            "extracted_information": _thaw(self.extracted_information),
        }

    @classmethod
    def from_snapshot(cls, snapshot: Mapping[str, Any]) -> "InformationState":
        slots: dict[str, SlotValue | None] = {}
        for caption, value in snapshot["predefined_slots"].items():
            slots[caption] = None if value is None else SlotValue(value["raw"], value["normalized"])
        return cls(
            domain_caption=snapshot["domain_caption"],
            predefined_slots=slots,
            extracted_information=_freeze_mapping(snapshot["extracted_information"]),
            text_part=snapshot["text_part"],
            it_is_required_to_update_predefined_slots=TriFlag(
                snapshot["it_is_required_to_update_predefined_slots"]
            ),
            it_is_required_to_query_database=TriFlag(snapshot["it_is_required_to_query_database"]),
            db_query_output_list=[
                EntityRecord(columns=dict(row["columns"]), row_index=row["row_index"])
                for row in snapshot["db_query_output_list"]
            ],
            query_output_list_is_empty=TriFlag(snapshot["query_output_list_is_empty"]),
            dialogue_is_completed=TriFlag(snapshot["dialogue_is_completed"]),
            utterance_to_update_predefined_slot=snapshot["utterance_to_update_predefined_slot"],
            checked_there_is_no_other_constraint=TriFlag(
                snapshot["checked_there_is_no_other_constraint"]
            ),
            user_rejects_output=TriFlag(snapshot["user_rejects_output"]),
            there_is_wrong_or_out_of_domain_value=TriFlag(
                snapshot["there_is_wrong_or_out_of_domain_value"]
            ),
            wrong_or_out_of_domain_values_list=[
                (caption, raw) for caption, raw in snapshot["wrong_or_out_of_domain_values_list"]
            ],
            user_utterance_index=snapshot["user_utterance_index"],
            user_other_constraints=snapshot["user_other_constraints"],
            wrongness_within_other_constraints_checked=TriFlag(
                snapshot["wrongness_within_other_constraints_checked"]
            ),
            user_is_informed_there_is_no_entity_in_db=TriFlag(
                snapshot["user_is_informed_there_is_no_entity_in_db"]
            ),
            user_is_informed_of_db_output=TriFlag(snapshot["user_is_informed_of_db_output"]),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InformationState):
            return NotImplemented
        return self.to_snapshot() == other.to_snapshot()


def state_to_json(state: InformationState) -> str:
    """Canonical serialization; the HTTP API must return these exact bytes."""
    return json.dumps(state.to_snapshot(), ensure_ascii=False, separators=(",", ":"))


def state_from_json(text: str) -> InformationState:
    return InformationState.from_snapshot(json.loads(text))


def _thaw(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {k: _thaw(v) for k, v in value.items()}
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    if isinstance(value, list):
        return [_thaw(v) for v in value]
    return value


def _freeze(value: Any) -> Any:
    if isinstance(value, Mapping):
        return _freeze_mapping(value)
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


def _freeze_mapping(mapping: Mapping[str, Any]) -> Mapping[str, Any]:
    return MappingProxyType({k: _freeze(v) for k, v in mapping.items()})


def domain_information(schema: DomainSchema, db: EntityDatabase) -> Mapping[str, Any]:
    """Immutable summary of the per-domain dictionary attached to each state."""
    return _freeze_mapping(
        {
            "domain_caption": schema.domain_caption,
            "captions": [s.caption for s in schema.slots],
            "characterizations": [s.characterization for s in schema.slots],
            "configurations": [list(s.permitted_configurations) for s in schema.slots],
            "filterable_captions": list(schema.filterable_captions),
            "database_columns": list(db.columns),
            "entity_count": len(db.rows),
        }
    )


def new_information_state(schema: DomainSchema, db: EntityDatabase) -> InformationState:
    """Fresh state: preference update required, dialogue not completed, all else unset."""
    if schema.domain_caption != db.domain_caption:
        raise ConfigurationError(
            f"schema domain {schema.domain_caption!r} does not match "
            f"database domain {db.domain_caption!r}"
        )
    return InformationState(
        domain_caption=schema.domain_caption,
        predefined_slots={s.caption: None for s in schema.slots},
        extracted_information=domain_information(schema, db),
        it_is_required_to_update_predefined_slots=TriFlag.TRUE,
        dialogue_is_completed=TriFlag.FALSE,
    )
