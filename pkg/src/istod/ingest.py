"""Dataset loading: schema, per-domain entity tables and conversations.

Reads the MultiWOZ 2.2 distribution layout (a schema file, one database file
per domain, dialogue files per split) and applies the preprocessing the engine
expects: caption normalization through a shipped per-domain mapping file,
permitted-configuration extraction from database columns for open slots, and
single-domain filtering of conversations. The product is one immutable
dictionary per domain, attached to every session in that domain.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .database import EntityDatabase, EntityRecord
from .errors import ConfigurationError, IngestError
from .nlu import ExtractorHints
from .state import DomainSchema, SlotSpec, normalize_value
from .strategy import Session, new_session

logger = logging.getLogger(__name__)

SUPPORTED_DOMAINS = ("hotel", "train", "attraction", "restaurant")


@dataclass(frozen=True)
class DomainConfig:
    """Shipped, versioned per-domain mapping: captions to columns, plus extractor cues."""

    version: int = 1
    booking_only: tuple[str, ...] = ()
    open_slots: tuple[str, ...] = ()
    skip_extraction: tuple[str, ...] = ()
    caption_map: Mapping[str, str] = field(default_factory=dict)
    context_cues: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    capture_cues: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    suggestions_per_slot: int = 3
    max_suggestion_items: int = 6

    @classmethod
    def load(cls, domain: str) -> "DomainConfig":
        try:
            text = (
                resources.files("istod.resources.domain_config")
                .joinpath(f"{domain}.json")
                .read_text("utf-8")
            )
        except FileNotFoundError:
            logger.warning("no shipped mapping file for domain %r; using defaults", domain)
            return cls()
        raw = json.loads(text)
        return cls(
            version=raw.get("version", 1),
            booking_only=tuple(raw.get("booking_only", ())),
            open_slots=tuple(raw.get("open_slots", ())),
            skip_extraction=tuple(raw.get("skip_extraction", ())),
            caption_map=dict(raw.get("caption_map", {})),
            context_cues={k: tuple(v) for k, v in raw.get("context_cues", {}).items()},
            capture_cues={k: tuple(v) for k, v in raw.get("capture_cues", {}).items()},
            suggestions_per_slot=int(raw.get("suggestions_per_slot", 3)),
            max_suggestion_items=int(raw.get("max_suggestion_items", 6)),
        )


@dataclass(frozen=True)
class ConversationTurn:
    speaker: str  # "user" or "system"
    utterance: str
    states: Mapping[str, Mapping[str, tuple[str, ...]]]  # service -> slot caption -> values


@dataclass(frozen=True)
class RawConversation:
    """One dataset conversation: id, covered services, alternating turns."""

    id: str
    services: tuple[str, ...]
    turns: tuple[ConversationTurn, ...]

    @property
    def user_turns(self) -> tuple[ConversationTurn, ...]:
        return tuple(t for t in self.turns if t.speaker == "user")

    @property
    def domain(self) -> str:
        if len(self.services) != 1:
            raise IngestError(f"conversation {self.id} covers {len(self.services)} services")
        return self.services[0]


@dataclass(frozen=True)
class DomainDictionary:
    """The immutable per-domain bundle every session reads: schema, table, mapping, cues."""

    schema: DomainSchema
    database: EntityDatabase
    caption_map: Mapping[str, str]
    hints: ExtractorHints
    suggestions_per_slot: int = 3
    max_suggestion_items: int = 6

    @property
    def domain_caption(self) -> str:
        return self.schema.domain_caption

    def new_session(self, **kwargs: Any) -> Session:
        return new_session(
            self.schema,
            self.database,
            hints=self.hints,
            suggestions_per_slot=self.suggestions_per_slot,
            max_suggestion_items=self.max_suggestion_items,
            **kwargs,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "domain_caption": self.domain_caption,
            "slots": [
                {
                    "caption": s.caption,
                    "characterization": s.characterization,
                    "permitted_configurations": list(s.permitted_configurations),
                    "filterable": s.filterable,
                    "skip_extraction": s.skip_extraction,
                }
                for s in self.schema.slots
            ],
            "caption_map": dict(self.caption_map),
            "columns": list(self.database.columns),
            "entities": [dict(r.columns) for r in self.database.rows],
            "context_cues": {k: list(v) for k, v in self.hints.context_cues.items()},
            "capture_cues": {k: list(v) for k, v in self.hints.capture_cues.items()},
            "open_slot_vocab": {k: list(v) for k, v in self.hints.open_slot_vocab.items()},
            "suggestions_per_slot": self.suggestions_per_slot,
            "max_suggestion_items": self.max_suggestion_items,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "DomainDictionary":
        schema = DomainSchema(
            domain_caption=raw["domain_caption"],
            slots=tuple(
                SlotSpec(
                    caption=s["caption"],
                    characterization=s["characterization"],
                    permitted_configurations=tuple(s["permitted_configurations"]),
                    filterable=s["filterable"],
                    skip_extraction=s["skip_extraction"],
                )
                for s in raw["slots"]
            ),
        )
        database = EntityDatabase(
            domain_caption=raw["domain_caption"],
            columns=tuple(raw["columns"]),
            rows=tuple(
                EntityRecord(columns=dict(r), row_index=i) for i, r in enumerate(raw["entities"])
            ),
            caption_map=dict(raw["caption_map"]),
        )
        hints = ExtractorHints(
            context_cues={k: tuple(v) for k, v in raw["context_cues"].items()},
            capture_cues={k: tuple(v) for k, v in raw["capture_cues"].items()},
            open_slot_vocab={k: tuple(v) for k, v in raw["open_slot_vocab"].items()},
        )
        return cls(
            schema=schema,
            database=database,
            caption_map=raw["caption_map"],
            hints=hints,
            suggestions_per_slot=raw.get("suggestions_per_slot", 3),
            max_suggestion_items=raw.get("max_suggestion_items", 6),
        )

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_schema(path: str | Path) -> list[DomainSchema]:
    """Parse the dataset schema file into one DomainSchema per service."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"schema file not found: {path}")
    try:
        raw = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"schema file {path} is not valid JSON: {exc}") from exc
    schemas = []
    for service in raw:
        domain = service.get("service_name", "")
        slots = []
        for slot in service.get("slots", []):
            name = slot.get("name", "")
            caption = name.split("-", 1)[1] if "-" in name else name
            if not caption:
                raise IngestError(f"schema for {domain!r} has a slot without a name")
            permitted = ()
            if slot.get("is_categorical"):
                permitted = tuple(
                    normalize_value(v, caption) for v in slot.get("possible_values", [])
                )
            slots.append(
                SlotSpec(
                    caption=caption,
                    characterization=slot.get("description", ""),
                    permitted_configurations=permitted,
                )
            )
        try:
            schemas.append(DomainSchema(domain_caption=domain, slots=tuple(slots)))
        except ConfigurationError as exc:
            raise IngestError(f"schema for {domain!r}: {exc}") from exc
    return schemas


def load_database(
    path: str | Path, domain: str, config: DomainConfig | None = None
) -> EntityDatabase:
    """Parse one entity table; columns are renamed to slot captions via the mapping file."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"database file not found: {path}")
    config = config or DomainConfig.load(domain)
    try:
        raw = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestError(f"database file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise IngestError(f"database file {path} must contain a list of rows")
    rename = {column: caption for caption, column in config.caption_map.items()}
    if len(rename) != len(config.caption_map):
        raise IngestError(f"caption map for {domain!r} maps several slots to one column")
    columns: tuple[str, ...] | None = None
    records: list[EntityRecord] = []
    skipped = 0
    for index, row in enumerate(raw):
        if not isinstance(row, dict):
            skipped += 1
            logger.warning("%s row %d is not an object; skipped", domain, index)
            continue
        renamed = {rename.get(str(k), str(k)): str(v) for k, v in row.items()}
        if columns is None:
            columns = tuple(renamed)
        if not set(columns) <= set(renamed):
            skipped += 1
            logger.warning("%s row %d is missing columns; skipped", domain, index)
            continue
        records.append(
            EntityRecord(columns={c: renamed[c] for c in columns}, row_index=len(records))
        )
    if skipped:
        logger.warning("%s database: skipped %d malformed rows", domain, skipped)
    return EntityDatabase(
        domain_caption=domain,
        columns=columns or (),
        rows=tuple(records),
        caption_map=dict(config.caption_map),
    )


def build_domain_dictionary(
    domain: str,
    schema: DomainSchema,
    database: EntityDatabase,
    config: DomainConfig | None = None,
) -> DomainDictionary:
    """Assemble the immutable per-domain dictionary from loaded schema and table.

    Open-configuration slots get their permitted lists from the distinct
    normalized values of the backing column; slots listed as open in the
    mapping file stay unconstrained; booking-only slots are never filterable.
    """
    if schema.domain_caption != domain or database.domain_caption != domain:
        raise IngestError(f"domain mismatch assembling dictionary for {domain!r}")
    config = config or DomainConfig.load(domain)
    slots = []
    vocab: dict[str, tuple[str, ...]] = {}
    for spec in schema.slots:
        caption = spec.caption
        has_column = database.has_column(caption) and caption in config.caption_map
        permitted = spec.permitted_configurations
        if not permitted and caption not in config.open_slots and has_column:
            permitted = tuple(
                sorted({normalize_value(v, caption) for v in database.column_values(caption)})
            )
        if caption in config.open_slots and has_column:
            vocab[caption] = tuple(
                sorted({normalize_value(v, caption) for v in database.column_values(caption)})
            )
        slots.append(
            SlotSpec(
                caption=caption,
                characterization=spec.characterization,
                permitted_configurations=permitted,
                filterable=has_column and caption not in config.booking_only,
                skip_extraction=caption in config.skip_extraction,
            )
        )
    enriched = DomainSchema(domain_caption=domain, slots=tuple(slots))
    hints = ExtractorHints(
        context_cues=dict(config.context_cues),
        capture_cues=dict(config.capture_cues),
        open_slot_vocab=vocab,
    )
    return DomainDictionary(
        schema=enriched,
        database=database,
        caption_map={
            c: config.caption_map[c] for c in enriched.filterable_captions if c in config.caption_map
        },
        hints=hints,
        suggestions_per_slot=config.suggestions_per_slot,
        max_suggestion_items=config.max_suggestion_items,
    )


def load_domain(data_dir: str | Path, domain: str) -> DomainDictionary:
    data_dir = Path(data_dir)
    schemas = {s.domain_caption: s for s in load_schema(data_dir / "schema.json")}
    if domain not in schemas:
        raise IngestError(f"domain {domain!r} not present in schema file")
    config = DomainConfig.load(domain)
    database = load_database(data_dir / f"{domain}_db.json", domain, config)
    return build_domain_dictionary(domain, schemas[domain], database, config)


def load_domains(
    data_dir: str | Path, domains: Sequence[str] = SUPPORTED_DOMAINS
) -> dict[str, DomainDictionary]:
    return {domain: load_domain(data_dir, domain) for domain in domains}


def _parse_conversation(raw: Mapping[str, Any]) -> RawConversation:
    conv_id = raw.get("dialogue_id", "?")
    turns = []
    previous_speaker = None
    for turn in raw.get("turns", []):
        speaker = str(turn.get("speaker", "")).lower()
        if speaker not in ("user", "system"):
            raise IngestError(f"conversation {conv_id}: unknown speaker {speaker!r}")
        if speaker == previous_speaker:
            raise IngestError(f"conversation {conv_id}: turns do not alternate speakers")
        previous_speaker = speaker
        states: dict[str, dict[str, tuple[str, ...]]] = {}
        for frame in turn.get("frames", []):
            service = frame.get("service", "")
            slot_values = frame.get("state", {}).get("slot_values", {})
            states[service] = {
                name.split("-", 1)[1] if "-" in name else name: tuple(str(v) for v in values)
                for name, values in slot_values.items()
            }
        turns.append(
            ConversationTurn(
                speaker=speaker, utterance=str(turn.get("utterance", "")), states=states
            )
        )
    return RawConversation(
        id=conv_id,
        services=tuple(raw.get("services", [])),
        turns=tuple(turns),
    )


def load_conversations(path: str | Path) -> list[RawConversation]:
    """Load dialogue files: a single JSON file or every dialogues_*.json in a directory."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("dialogues_*.json")) or sorted(path.glob("*.json"))
    else:
        files = [path]
    if not files:
        raise IngestError(f"no dialogue files found under {path}")
    conversations = []
    for file in files:
        try:
            raw = json.loads(file.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise IngestError(f"dialogue file {file} is not valid JSON: {exc}") from exc
        for item in raw:
            conversations.append(_parse_conversation(item))
    return conversations


def filter_single_domain(
    conversations: Iterable[RawConversation],
    domains: Sequence[str] = SUPPORTED_DOMAINS,
) -> list[RawConversation]:
    """Keep exactly the conversations covering one service among the supported domains."""
    kept = []
    for conversation in conversations:
        if len(conversation.services) == 1 and conversation.services[0] in domains:
            kept.append(conversation)
    return kept


def dump_dictionary(dictionary: DomainDictionary) -> str:
    """Structured text dump for inspection."""
    return json.dumps(dictionary.to_dict(), indent=2, ensure_ascii=False, sort_keys=True)
