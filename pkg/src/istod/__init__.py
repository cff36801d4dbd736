"""Information-state task-oriented dialogue engine."""

from .database import EntityDatabase, EntityRecord, build_database
from .state import (
    DomainSchema,
    InformationState,
    SlotSpec,
    SlotValue,
    TriFlag,
    new_information_state,
    normalize_value,
)
from .strategy import Session, TurnResult, advance, new_session, run_scripted

__all__ = [
    "DomainSchema",
    "EntityDatabase",
    "EntityRecord",
    "InformationState",
    "Session",
    "SlotSpec",
    "SlotValue",
    "TriFlag",
    "TurnResult",
    "advance",
    "build_database",
    "new_information_state",
    "new_session",
    "normalize_value",
    "run_scripted",
]

__version__ = "0.1.0"
