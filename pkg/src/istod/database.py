"""Entity database: one table per domain, immutable after load."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import ConfigurationError


@dataclass(frozen=True)
class EntityRecord:
    """One database row: column caption to value, plus its source row index."""

    columns: Mapping[str, str]
    row_index: int

    def text(self) -> str:
        """Concatenated column values, used for lexical ranking."""
        return " ".join(str(v) for v in self.columns.values())


@dataclass(frozen=True)
class EntityDatabase:
    """A per-domain entity table; columns are identical across all rows.

    ``caption_map`` records which original file column backs each slot caption;
    after ingest the row columns are already renamed to slot captions where a
    mapping exists, so lookups use captions directly.
    """

    domain_caption: str
    columns: tuple[str, ...]
    rows: tuple[EntityRecord, ...]
    caption_map: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = set(self.columns)
        for record in self.rows:
            if set(record.columns) != expected:
                raise ConfigurationError(
                    f"row {record.row_index} of {self.domain_caption!r} database has columns "
                    f"{sorted(record.columns)} but the table declares {sorted(expected)}"
                )

    def has_column(self, caption: str) -> bool:
        return caption in self.columns

    def column_values(self, caption: str) -> list[str]:
        if not self.has_column(caption):
            raise ConfigurationError(
                f"unknown column {caption!r} in {self.domain_caption!r} database"
            )
        return [str(record.columns[caption]) for record in self.rows]


def build_database(
    domain_caption: str,
    columns: list[str] | tuple[str, ...],
    rows: list[dict[str, str]],
    caption_map: Mapping[str, str] | None = None,
) -> EntityDatabase:
    """Convenience constructor for fixture tables built directly in code."""
    records = tuple(
        EntityRecord(columns={c: str(row[c]) for c in columns}, row_index=i)
        for i, row in enumerate(rows)
    )
    return EntityDatabase(
        domain_caption=domain_caption,
        columns=tuple(columns),
        rows=records,
        caption_map=dict(caption_map or {}),
    )
