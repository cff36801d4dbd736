"""Preference extraction: prompt construction, response parsing, and the rule extractor.

Two interchangeable extractors produce the same outcome shape: a
language-model extractor that renders the slot-by-slot instruction prompt and
parses the returned dictionary, and a deterministic rule extractor used by all
offline tests. Outcome invariants (permitted-list membership, mutual exclusion
of value and wrong entry) are enforced in one funnel regardless of backend.
"""

from __future__ import annotations

import ast
import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping, Protocol

import httpx

from .errors import BackendError, ExtractionError
from .lexicon import STOP_WORDS, tokenize
from .state import DomainSchema, SlotValue, normalize_value

logger = logging.getLogger(__name__)

WRONG_KEY_SUFFIX = "-wrong-or-out-of-domain"
_NONE_STRINGS = {"none", ""}
_NUMERIC_RE = re.compile(r"^\d+$")

FORMAT_REMINDER = (
    "Reminder: only display the dictionary itself, one variable per line, with no "
    "surrounding characters such as triple quotes or code block delimiters."
)


def _worked_example() -> str:
    return resources.files("istod.resources").joinpath("extraction_example.txt").read_text("utf-8")


@dataclass(frozen=True)
class SlotExtraction:
    """Extraction result for one slot: a usable value or a wrong/out-of-domain entry."""

    value: SlotValue | None = None
    wrong_or_out_of_domain: str | None = None


@dataclass
class ExtractionOutcome:
    """Per-slot extraction entries plus the free-text remainder of the preferences."""

    slots: dict[str, SlotExtraction]
    text_part: str = ""

    @classmethod
    def build(
        cls,
        schema: DomainSchema,
        values: Mapping[str, str | None],
        wrongs: Mapping[str, str | None] | None = None,
        text_part: str = "",
    ) -> "ExtractionOutcome":
        """Normalize and validate raw per-slot values into a well-formed outcome.

        A value outside a non-empty permitted list is demoted to the slot's
        wrong/out-of-domain entry; slots marked skip_extraction never carry
        either. This is the single funnel that guarantees the type invariants
        for every backend.
        """
        wrongs = wrongs or {}
        entries: dict[str, SlotExtraction] = {}
        for spec in schema.slots:
            if spec.skip_extraction:
                entries[spec.caption] = SlotExtraction()
                continue
            raw = values.get(spec.caption)
            wrong = wrongs.get(spec.caption)
            if raw is not None:
                normalized = normalize_value(raw, spec)
                if not normalized:
                    raw = None
                elif spec.constrained and normalized not in spec.permitted_configurations:
                    wrong = raw if wrong is None else wrong
                    raw = None
                else:
                    entries[spec.caption] = SlotExtraction(value=SlotValue(raw, normalized))
                    continue
            entries[spec.caption] = SlotExtraction(wrong_or_out_of_domain=wrong)
        return cls(slots=entries, text_part=text_part)

    def wrong_entries(self, schema: DomainSchema) -> list[tuple[str, str]]:
        """Wrong/out-of-domain pairs in schema slot order."""
        return [
            (spec.caption, self.slots[spec.caption].wrong_or_out_of_domain)
            for spec in schema.slots
            if spec.caption in self.slots
            and self.slots[spec.caption].wrong_or_out_of_domain is not None
        ]

    def extracted_values(self) -> dict[str, SlotValue]:
        return {c: e.value for c, e in self.slots.items() if e.value is not None}


class Extractor(Protocol):
    """Common surface of the rule-based and language-model extractors."""

    kind: str

    def extract(self, utterance: str) -> ExtractionOutcome: ...


# ---------------------------------------------------------------------------
# Prompt construction and response parsing (language-model path)
# ---------------------------------------------------------------------------


def build_extraction_prompt(schema: DomainSchema, utterance: str) -> str:
    """Render the slot-extraction instructions for one utterance.

    One instruction block per slot (slots marked skip_extraction are left
    out), then the output-dictionary instruction, the text-remainder
    instruction and a fixed worked example. Deterministic for fixed inputs.
    """
    domain = schema.domain_caption
    active = [s for s in schema.slots if not s.skip_extraction]
    parts = [
        f"Understanding User Input and Slot Extraction for user queries in {domain} domain."
    ]
    for spec in active:
        config = ", ".join(spec.permitted_configurations)
        parts.append(
            f"Instructions for extraction of {spec.caption} which indicates"
            f" {spec.characterization}:\n"
            f"- Provided a list of {spec.caption}-domain values: [{config}]\n"
            f"- Extract {spec.caption} values from the query '{utterance}' excluding any"
            f" prefixes or suffixes like {spec.caption}.\n"
            f"- If the provided list is empty, assign the extracted {spec.caption} value to"
            f" the {spec.caption}-variable and {spec.caption}{WRONG_KEY_SUFFIX} is 'None'.\n"
            f"- Otherwise, if and only if at least one extracted {spec.caption} value exists"
            f" with the same typo (ignoring case differences and without {spec.caption}"
            f" prefix/suffix; in addition, for numbers consider their writing in letters and"
            f" numbers the same) in the provided list, assign it to the"
            f" {spec.caption}-variable and {spec.caption}{WRONG_KEY_SUFFIX} is 'None' (not null).\n"
            f"- Otherwise, if the provided list is not empty and there are extracted"
            f" {spec.caption} values but none of them exists with the same typo in the"
            f" provided list, the value of the {spec.caption}-variable is 'None'; put the"
            f" extracted value, which is wrong or out-of-domain, in"
            f" {spec.caption}{WRONG_KEY_SUFFIX}."
        )
    variable_lines = ", ".join(
        f"{s.caption} and the value of the {s.caption}-variable extracted from the query"
        f" (without any change, for example do not change 'None' to other forms like null),"
        f" {s.caption}{WRONG_KEY_SUFFIX} and its value"
        for s in active
    )
    parts.append(
        "Put the information of the variables in a Python dictionary and only display the"
        " dictionary (without any surrounding characters like triple quotes or code block"
        " delimiters) as output. The output dictionary consists of the information of one"
        f" variable in each line; the information of each variable includes: {variable_lines}."
    )
    strip_list = ", ".join(f"the {s.caption}-variable and affixes such as {s.caption}" for s in active)
    parts.append(
        f"Extract all attributes of {domain} from the query and put them in the"
        f" text_part-variable, then remove the stop-words and {strip_list} from this"
        " text_part-variable. Put one extra line in the output for text_part, which consists"
        ' of "text_part": text_part_value.'
    )
    parts.append(_worked_example().strip())
    return "\n\n".join(parts)


def _strip_code_fences(text: str) -> str:
    stripped = text.strip()
    fence = re.match(r"^```[a-zA-Z]*\n(.*?)\n?```$", stripped, flags=re.DOTALL)
    if fence:
        stripped = fence.group(1).strip()
    if stripped.startswith("'''") and stripped.endswith("'''") and len(stripped) >= 6:
        stripped = stripped[3:-3].strip()
    return stripped


def _coerce_entry(value: Any) -> str | None:
    if isinstance(value, list):
        if not value:
            return None
        value = value[0]
    if value is None:
        return None
    text = str(value).strip()
    if text.lower() in _NONE_STRINGS:
        return None
    return text


def parse_extraction_response(response: str, schema: DomainSchema) -> ExtractionOutcome:
    """Parse the backend's dictionary reply into a validated outcome.

    List-valued entries collapse to their first element; the string "None" and
    absent keys both mean no value; unknown keys are ignored with a warning.
    """
    body = _strip_code_fences(response)
    mapping: Any = None
    for parser in (ast.literal_eval, json.loads):
        try:
            mapping = parser(body)
            break
        except (ValueError, SyntaxError):
            continue
    if not isinstance(mapping, dict):
        raise ExtractionError(
            "extraction response is not a key/value map", diagnostic=response[:500]
        )
    values: dict[str, str | None] = {}
    wrongs: dict[str, str | None] = {}
    text_part = ""
    for key, entry in mapping.items():
        key = str(key).strip()
        if key == "text_part":
            text_part = _coerce_entry(entry) or ""
        elif key.endswith(WRONG_KEY_SUFFIX):
            caption = key[: -len(WRONG_KEY_SUFFIX)]
            if schema.has_slot(caption):
                wrongs[caption] = _coerce_entry(entry)
            else:
                logger.warning("ignoring wrong-value entry for unknown slot %r", caption)
        elif schema.has_slot(key):
            values[key] = _coerce_entry(entry)
        else:
            logger.warning("ignoring unknown extraction key %r", key)
    return ExtractionOutcome.build(schema, values, wrongs, text_part)


def render_extraction_response(outcome: ExtractionOutcome) -> str:
    """Canonical reply text for an outcome; parsing it back is the identity."""
    mapping: dict[str, str] = {}
    for caption, entry in outcome.slots.items():
        mapping[caption] = entry.value.raw if entry.value is not None else "None"
        mapping[caption + WRONG_KEY_SUFFIX] = (
            entry.wrong_or_out_of_domain if entry.wrong_or_out_of_domain is not None else "None"
        )
    mapping["text_part"] = outcome.text_part
    return repr(mapping)


# ---------------------------------------------------------------------------
# Language-model backend
# ---------------------------------------------------------------------------


class CompletionBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


@dataclass
class LanguageModelBackend:
    """OpenAI-compatible chat-completion transport with a retry budget of one.

    Every request/response pair is appended to a session-scoped audit log. A
    custom httpx transport can be injected for fault-injection tests.
    """

    endpoint: str
    model: str
    api_key: str = ""
    timeout: float = 30.0
    transport: httpx.BaseTransport | None = None
    audit_log: list[dict[str, Any]] = field(default_factory=list)
    kind: str = "language-model"

    @classmethod
    def from_environment(cls) -> "LanguageModelBackend":
        endpoint = os.environ.get("ISTOD_LLM_ENDPOINT", "")
        model = os.environ.get("ISTOD_LLM_MODEL", "")
        if not endpoint or not model:
            raise BackendError(
                "language-model backend not configured: set ISTOD_LLM_ENDPOINT and ISTOD_LLM_MODEL"
            )
        return cls(
            endpoint=endpoint,
            model=model,
            api_key=os.environ.get("ISTOD_LLM_API_KEY", ""),
            timeout=float(os.environ.get("ISTOD_LLM_TIMEOUT", "30")),
        )

    def _request(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "system", "content": prompt}],
        }
        with httpx.Client(transport=self.transport, timeout=self.timeout) as client:
            response = client.post(self.endpoint, json=payload, headers=headers)
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]

    def complete(self, prompt: str) -> str:
        last_error: Exception | None = None
        for attempt in (1, 2):
            try:
                text = self._request(prompt)
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last_error = exc
                self.audit_log.append(
                    {"ts": time.time(), "attempt": attempt, "prompt": prompt, "error": str(exc)}
                )
                continue
            self.audit_log.append(
                {"ts": time.time(), "attempt": attempt, "prompt": prompt, "response": text}
            )
            return text
        raise BackendError(
            "language-model request failed after one retry", diagnostic=str(last_error)
        )


def complete(backend: CompletionBackend, prompt: str) -> str:
    """Run one completion against a configured backend."""
    return backend.complete(prompt)


def rule_based_extract(
    schema: DomainSchema, utterance: str, hints: "ExtractorHints | None" = None
) -> ExtractionOutcome:
    """One-shot rule-based extraction; see RuleBasedExtractor for the mechanics."""
    return RuleBasedExtractor(schema, hints).extract(utterance)


def export_audit_log(backend: "LanguageModelBackend") -> str:
    """The backend's request/response audit as line-delimited JSON records."""
    return "\n".join(json.dumps(record, ensure_ascii=False) for record in backend.audit_log)


class LanguageModelExtractor:
    """Extraction through a completion backend, with one re-prompt on parse failure."""

    kind = "language-model"

    def __init__(self, schema: DomainSchema, backend: CompletionBackend):
        self.schema = schema
        self.backend = backend

    def extract(self, utterance: str) -> ExtractionOutcome:
        prompt = build_extraction_prompt(self.schema, utterance)
        response = complete(self.backend, prompt)
        try:
            return parse_extraction_response(response, self.schema)
        except ExtractionError:
            logger.warning("unparseable extraction response; re-prompting once")
        response = complete(self.backend, prompt + "\n\n" + FORMAT_REMINDER)
        return parse_extraction_response(response, self.schema)


# ---------------------------------------------------------------------------
# Rule-based extractor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtractorHints:
    """Deterministic matching aids shipped with each domain.

    ``context_cues`` disambiguate values permitted by several slots (and are
    mandatory for purely numeric values); ``capture_cues`` are phrases whose
    following tokens name a slot configuration, used both for matching and for
    flagging wrong/out-of-domain entries; ``open_slot_vocab`` supplies known
    values for slots with no permitted list.
    """

    context_cues: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    capture_cues: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    open_slot_vocab: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class _Candidate:
    caption: str
    schema_index: int
    value: str
    start: int
    end: int
    cue_gap: int | None  # None when no cue is adjacent

    def sort_key(self) -> tuple:
        cued = self.cue_gap is not None
        return (
            0 if cued else 1,
            self.cue_gap if cued else 999,
            -(self.end - self.start),
            self.schema_index,
            self.start,
        )


_CUE_WINDOW = 2
_MAX_WRONG_TOKENS = 3


class RuleBasedExtractor:
    """Longest-match scan of the utterance against permitted configurations.

    Fully deterministic and total: the same utterance always yields the same
    outcome and no input raises.
    """

    kind = "rule-based"

    def __init__(self, schema: DomainSchema, hints: ExtractorHints | None = None):
        self.schema = schema
        self.hints = hints or ExtractorHints()
        self._value_tokens: dict[str, list[tuple[str, tuple[str, ...]]]] = {}
        token_owners: dict[tuple[str, ...], set[str]] = {}
        for spec in schema.slots:
            if spec.skip_extraction:
                continue
            pool = spec.permitted_configurations or self.hints.open_slot_vocab.get(
                spec.caption, ()
            )
            entries = []
            for value in pool:
                tokens = tuple(tokenize(value))
                if not tokens:
                    continue
                entries.append((value, tokens))
                token_owners.setdefault(tokens, set()).add(spec.caption)
            self._value_tokens[spec.caption] = entries
        self._shared_values = {tokens for tokens, owners in token_owners.items() if len(owners) > 1}
        self._cue_tokens: dict[str, list[tuple[str, ...]]] = {}
        for spec in schema.slots:
            cues = list(self.hints.context_cues.get(spec.caption, ()))
            cues += list(self.hints.capture_cues.get(spec.caption, ()))
            self._cue_tokens[spec.caption] = [tuple(tokenize(c)) for c in cues if tokenize(c)]
        self._caption_tokens = {
            t
            for spec in schema.slots
            for t in (spec.caption.lower(), spec.caption.lower() + "s")
        } | {
            spec.caption.lower()[:-1]
            for spec in schema.slots
            if spec.caption.lower().endswith("s")
        }

    def _cue_positions(self, tokens: list[str], caption: str) -> list[tuple[int, int]]:
        spans = []
        for cue in self._cue_tokens.get(caption, []):
            for start in range(len(tokens) - len(cue) + 1):
                if tuple(tokens[start : start + len(cue)]) == cue:
                    spans.append((start, start + len(cue)))
        return spans

    @staticmethod
    def _gap(cue: tuple[int, int], span: tuple[int, int]) -> int | None:
        cs, ce = cue
        s, e = span
        if ce <= s:
            gap = s - ce
        elif e <= cs:
            gap = cs - e
        else:
            return None  # overlapping; a cue cannot sit inside the value span
        return gap if gap <= _CUE_WINDOW else None

    def _candidates(self, tokens: list[str]) -> list[_Candidate]:
        found = []
        for index, spec in enumerate(self.schema.slots):
            if spec.skip_extraction:
                continue
            cue_spans = self._cue_positions(tokens, spec.caption)
            for value, value_tokens in self._value_tokens.get(spec.caption, []):
                needs_cue = all(_NUMERIC_RE.match(t) for t in value_tokens) or (
                    value_tokens in self._shared_values
                )
                for start in range(len(tokens) - len(value_tokens) + 1):
                    if tuple(tokens[start : start + len(value_tokens)]) != value_tokens:
                        continue
                    span = (start, start + len(value_tokens))
                    gaps = [g for c in cue_spans if (g := self._gap(c, span)) is not None]
                    cue_gap = min(gaps) if gaps else None
                    if needs_cue and cue_gap is None:
                        continue
                    found.append(
                        _Candidate(spec.caption, index, value, span[0], span[1], cue_gap)
                    )
        return sorted(found, key=_Candidate.sort_key)

    def extract(self, utterance: str) -> ExtractionOutcome:
        tokens = tokenize(utterance)
        claimed: list[bool] = [False] * len(tokens)
        values: dict[str, str] = {}
        consumed_cues: set[int] = set()
        for candidate in self._candidates(tokens):
            if candidate.caption in values:
                continue
            if any(claimed[i] for i in range(candidate.start, candidate.end)):
                continue
            values[candidate.caption] = candidate.value
            for i in range(candidate.start, candidate.end):
                claimed[i] = True
            for cue_span in self._cue_positions(tokens, candidate.caption):
                if self._gap(cue_span, (candidate.start, candidate.end)) is not None:
                    consumed_cues.update(range(cue_span[0], cue_span[1]))
        wrongs, wrong_token_indexes = self._capture_wrong_values(tokens, claimed, values)
        consumed_cues |= wrong_token_indexes[1]
        text_part = self._text_part(
            tokens, claimed, consumed_cues | wrong_token_indexes[0]
        )
        return ExtractionOutcome.build(self.schema, values, wrongs, text_part)

    def _capture_wrong_values(
        self, tokens: list[str], claimed: list[bool], values: dict[str, str]
    ) -> tuple[dict[str, str], tuple[set[int], set[int]]]:
        """Unclaimed content tokens right after a capture cue become wrong entries."""
        wrongs: dict[str, str] = {}
        wrong_tokens: set[int] = set()
        fired_cues: set[int] = set()
        for spec in self.schema.slots:
            if spec.skip_extraction or not spec.constrained or spec.caption in values:
                continue
            capture = [tuple(tokenize(c)) for c in self.hints.capture_cues.get(spec.caption, ())]
            if not capture:
                continue
            for cue in capture:
                if spec.caption in wrongs:
                    break
                for start in range(len(tokens) - len(cue) + 1):
                    if tuple(tokens[start : start + len(cue)]) != cue:
                        continue
                    position = start + len(cue)
                    if position >= len(tokens) or claimed[position]:
                        continue  # nothing follows, or the cue points at a real value
                    grabbed = []
                    for i in range(position, min(position + _MAX_WRONG_TOKENS, len(tokens))):
                        token = tokens[i]
                        if claimed[i] or token in STOP_WORDS or token in self._caption_tokens:
                            break
                        if any(token in cue_t for cue_t in self._all_cue_tokens()):
                            break
                        if token == self.schema.domain_caption.lower():
                            break
                        grabbed.append((i, token))
                    if grabbed:
                        wrongs[spec.caption] = " ".join(t for _, t in grabbed)
                        wrong_tokens.update(i for i, _ in grabbed)
                        fired_cues.update(range(start, start + len(cue)))
                        break
        return wrongs, (wrong_tokens, fired_cues)

    def _all_cue_tokens(self) -> list[tuple[str, ...]]:
        return [cue for cues in self._cue_tokens.values() for cue in cues]

    def _text_part(self, tokens: list[str], claimed: list[bool], dropped: set[int]) -> str:
        domain = self.schema.domain_caption.lower()
        kept = []
        for i, token in enumerate(tokens):
            if claimed[i] or i in dropped:
                continue
            if token in STOP_WORDS or token in self._caption_tokens or token == domain:
                continue
            kept.append(token)
        return " ".join(kept)
