"""HTTP session API: create sessions, post user messages, inspect state.

One process hosts all loaded domains; the domain is chosen at session
creation. Each session's advances are serialized behind a per-session lock;
snapshots are read under the same lock so they are only observed at phase
boundaries. The state endpoint returns the engine's canonical serialization
byte-for-byte, so clients never see a divergent projection.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Mapping

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .errors import IstodError, ProtocolError
from .ingest import DomainDictionary
from .nlu import LanguageModelBackend, LanguageModelExtractor
from .strategy import Session, TurnResult, advance, session_to_json

DEFAULT_IDLE_TIMEOUT = 3600.0


class CreateSessionRequest(BaseModel):
    domain: str
    extractor: str = "rule"


class MessageRequest(BaseModel):
    text: str


class TurnDocument(BaseModel):
    tod_utterance: str
    awaiting_input: bool
    completed: bool
    final_slots: dict[str, str] | None = None

    @classmethod
    def from_turn(cls, turn: TurnResult) -> "TurnDocument":
        return cls(
            tod_utterance=turn.tod_utterance,
            awaiting_input=turn.awaiting_input,
            completed=turn.completed,
            final_slots=turn.final_slots,
        )


class SessionCreated(BaseModel):
    session_id: str
    domain: str
    turn: TurnDocument


@dataclass
class ApiSession:
    """One hosted session plus its bookkeeping: lock, creation time, last turn."""

    session: Session
    created_at: float = field(default_factory=time.time)
    last_activity: float = field(default_factory=time.time)
    last_turn: TurnResult | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """Thread-safe session registry with idle expiry."""

    def __init__(self, idle_timeout: float = DEFAULT_IDLE_TIMEOUT):
        self.idle_timeout = idle_timeout
        self._sessions: dict[str, ApiSession] = {}
        self._lock = threading.Lock()

    def _purge(self) -> None:
        deadline = time.time() - self.idle_timeout
        for sid in [s for s, e in self._sessions.items() if e.last_activity < deadline]:
            del self._sessions[sid]

    def add(self, session: Session) -> ApiSession:
        entry = ApiSession(session=session)
        with self._lock:
            self._purge()
            self._sessions[session.id] = entry
        return entry

    def get(self, session_id: str) -> ApiSession:
        with self._lock:
            self._purge()
            entry = self._sessions.get(session_id)
        if entry is None:
            raise KeyError(session_id)
        return entry


def create_app(
    dictionaries: Mapping[str, DomainDictionary],
    *,
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT,
) -> FastAPI:
    app = FastAPI(title="istod", description="information-state dialogue sessions")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(idle_timeout)
    app.state.store = store
    app.state.dictionaries = dict(dictionaries)

    def _entry(session_id: str) -> ApiSession:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.get("/domains")
    def list_domains() -> list[str]:
        return sorted(app.state.dictionaries)

    @app.post("/sessions", response_model=SessionCreated)
    def create_session(request: CreateSessionRequest) -> SessionCreated:
        dictionary = app.state.dictionaries.get(request.domain)
        if dictionary is None:
            raise HTTPException(status_code=404, detail=f"unknown domain {request.domain!r}")
        kwargs = {"session_id": uuid.uuid4().hex}
        if request.extractor == "llm":
            try:
                backend = LanguageModelBackend.from_environment()
            except IstodError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            kwargs["extractor"] = LanguageModelExtractor(dictionary.schema, backend)
        elif request.extractor != "rule":
            raise HTTPException(status_code=400, detail="extractor must be 'rule' or 'llm'")
        session = dictionary.new_session(**kwargs)
        store.add(session)
        initial = TurnDocument(
            tod_utterance=session.state.utterance_to_update_predefined_slot,
            awaiting_input=True,
            completed=False,
            final_slots=None,
        )
        return SessionCreated(session_id=session.id, domain=request.domain, turn=initial)

    @app.post("/sessions/{session_id}/messages", response_model=TurnDocument)
    def post_message(session_id: str, request: MessageRequest) -> TurnDocument:
        entry = _entry(session_id)
        with entry.lock:
            if entry.session.completed:
                raise HTTPException(
                    status_code=409,
                    detail="session is completed and no longer accepts messages",
                )
            try:
                turn = advance(entry.session, request.text)
            except ProtocolError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except IstodError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            entry.last_turn = turn
            entry.last_activity = time.time()
        return TurnDocument.from_turn(turn)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str) -> Response:
        entry = _entry(session_id)
        with entry.lock:
            payload = session_to_json(entry.session)
            entry.last_activity = time.time()
        return Response(content=payload, media_type="application/json")

    return app
