"""Tokenization, stop words and number-word mapping shared by extraction and ranking."""

from __future__ import annotations

import re
from importlib import resources

# Words written in letters are treated the same as digits; bounded set on purpose.
NUMBER_WORDS = {
    "zero": "0",
    "one": "1",
    "two": "2",
    "three": "3",
    "four": "4",
    "five": "5",
    "six": "6",
    "seven": "7",
    "eight": "8",
    "nine": "9",
    "ten": "10",
}

_TOKEN_RE = re.compile(r"[a-z0-9]+(?::[0-9]+)?(?:'[a-z]+)?")


def _load_stop_words() -> frozenset[str]:
    text = resources.files("istod.resources").joinpath("stop_words.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


STOP_WORDS = _load_stop_words()


def tokenize(text: str) -> list[str]:
    """Lowercase tokens; keeps times like 20:15 as one token, maps number words to digits."""
    tokens = _TOKEN_RE.findall(text.lower())
    return [NUMBER_WORDS.get(t, t) for t in tokens]


def content_tokens(text: str) -> list[str]:
    """Tokens with stop words removed."""
    return [t for t in tokenize(text) if t not in STOP_WORDS]
