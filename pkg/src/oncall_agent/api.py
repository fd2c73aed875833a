"""HTTP + WebSocket surface over the orchestrator.

Endpoints (see README): session ingestion, card acceptance, knowledge-base
browsing, service metrics, and an ordered per-session event stream with
cursor resume.  The UI and the replay harness are both plain clients of
this contract; no domain logic lives here.
"""

from __future__ import annotations

import asyncio
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .model import AuthorRole, InvariantError
from .orchestrator import Orchestrator, SessionEvent, UnknownCard, UnknownSession


class CreateSessionBody(BaseModel):
    session_id: Optional[str] = None


class PostMessageBody(BaseModel):
    author: str
    text: str = ""
    ts: Optional[float] = None
    attachments: List[str] = []
    message_id: Optional[str] = None


def create_app(orch: Orchestrator) -> FastAPI:
    from contextlib import asynccontextmanager

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        orch.store.close()  # graceful shutdown flushes the store

    app = FastAPI(title="oncall-agent", lifespan=lifespan)
    app.state.orch = orch
    app.state.seq = 0

    def next_seq() -> int:
        app.state.seq += 1
        return app.state.seq

    @app.post("/sessions", status_code=201)
    async def create_session(body: CreateSessionBody) -> Dict[str, Any]:
        sid = body.session_id or f"s{len(orch.sessions) + 1:05d}"
        orch.create_session(sid)
        return {"session_id": sid}

    @app.post("/sessions/{session_id}/messages", status_code=202)
    async def post_message(session_id: str, body: PostMessageBody) -> Dict[str, Any]:
        try:
            author = AuthorRole(body.author)
        except ValueError:
            raise HTTPException(422, f"unknown author role {body.author!r}")
        seq = next_seq()
        try:
            orch.handle_event(
                SessionEvent(
                    kind="message_posted",
                    seq=seq,
                    session_id=session_id,
                    author=author,
                    text=body.text,
                    ts=body.ts,
                    attachments=body.attachments,
                    message_id=body.message_id,
                )
            )
        except UnknownSession:
            raise HTTPException(404, f"unknown session {session_id}")
        return {"seq": seq}

    @app.post("/sessions/{session_id}/join", status_code=202)
    async def analyst_join(session_id: str) -> Dict[str, Any]:
        seq = next_seq()
        try:
            orch.handle_event(
                SessionEvent(kind="analyst_joined", seq=seq, session_id=session_id)
            )
        except UnknownSession:
            raise HTTPException(404, f"unknown session {session_id}")
        return {"seq": seq}

    @app.post("/sessions/{session_id}/close", status_code=202)
    async def close_session(session_id: str) -> Dict[str, Any]:
        seq = next_seq()
        try:
            orch.handle_event(
                SessionEvent(kind="session_closed", seq=seq, session_id=session_id)
            )
        except UnknownSession:
            raise HTTPException(404, f"unknown session {session_id}")
        return {"seq": seq}

    @app.post("/cards/{card_id}/accept")
    async def accept_card(card_id: str) -> Dict[str, Any]:
        try:
            orch.handle_event(
                SessionEvent(kind="card_accepted", seq=next_seq(), session_id="", card_id=card_id)
            )
        except UnknownCard:
            raise HTTPException(404, f"unknown card {card_id}")
        except InvariantError as exc:
            raise HTTPException(409, str(exc))
        return {"card_id": card_id, "status": "Accepted"}

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str) -> Dict[str, Any]:
        try:
            session = orch.get_session(session_id)
        except UnknownSession:
            raise HTTPException(404, f"unknown session {session_id}")
        return session.to_dict()

    @app.get("/kb/entries")
    async def kb_entries(
        query: str = Query(default=""), k: int = Query(default=20)
    ) -> Dict[str, Any]:
        if query.strip():
            results = orch.store.search(query, path=None, k=k)
            entries = [dict(e.to_dict(), score=s) for e, s in results]
        else:
            entries = [e.to_dict() for _id, e in sorted(orch.store.entries.items())][:k]
        return {"entries": entries, "version": orch.store.version}

    @app.get("/kb/entries/{entry_id}")
    async def kb_entry(entry_id: str) -> Dict[str, Any]:
        history = [
            rec.to_dict() for rec in orch.store.mutation_log if rec.entry_id == entry_id
        ]
        entry = orch.store.entries.get(entry_id)
        if entry is None and not history:
            raise HTTPException(404, f"unknown entry {entry_id}")
        return {"entry": entry.to_dict() if entry else None, "history": history}

    @app.get("/metrics")
    async def metrics() -> Dict[str, Any]:
        return orch.metrics()

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(ws: WebSocket, session_id: str, cursor: int = 0) -> None:
        if session_id not in orch.sessions:
            await ws.close(code=4404)
            return
        queue: asyncio.Queue = asyncio.Queue()

        def listener(sid: str, payload: Dict[str, Any]) -> None:
            if sid == session_id:
                queue.put_nowait(payload)

        orch.stream_listeners.append(listener)
        await ws.accept()
        try:
            next_cursor = max(0, cursor)
            for ev in orch.streams.get(session_id, [])[next_cursor:]:
                await ws.send_json(ev)
                next_cursor = ev["cursor"] + 1
            while True:
                ev = await queue.get()
                if ev["cursor"] < next_cursor:
                    continue  # already delivered from history
                await ws.send_json(ev)
                next_cursor = ev["cursor"] + 1
        except WebSocketDisconnect:
            pass
        finally:
            orch.stream_listeners.remove(listener)

    return app
