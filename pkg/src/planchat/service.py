"""HTTP facade: sessions, messages, task lists, data ingestion, plan export.

Message handling is synchronous and strictly serial per session: a second
message posted while one is still being processed gets a 409 and should be
retried. Sessions are snapshotted to disk (write-temp-then-rename) after
every state change and reload transparently after a restart.
"""

from __future__ import annotations

import io
import json
import os
import threading
import uuid
import zipfile
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse

from .conversation import Engine
from .dataset import DatasetError
from .planner import plan_to_csv, plan_to_dict
from .session import SessionState, session_from_dict, session_to_dict

DEFAULT_PORT = 8080


class SessionStore:
    """In-memory sessions with atomic JSON snapshots under data_dir."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for path in sorted(self.root.glob("*.json")):
            session = session_from_dict(json.loads(path.read_text(encoding="utf-8")))
            self._sessions[session.session_id] = session

    def create(self) -> SessionState:
        session = SessionState(session_id=uuid.uuid4().hex[:12])
        with self._registry_lock:
            self._sessions[session.session_id] = session
        self.snapshot(session)
        return session

    def get(self, session_id: str) -> SessionState | None:
        return self._sessions.get(session_id)

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def snapshot(self, session: SessionState) -> None:
        path = self.root / f"{session.session_id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(session_to_dict(session)), encoding="utf-8")
        os.replace(tmp, path)


def _message_payload(session: SessionState) -> dict:
    message = session.messages[-1]
    return {
        "role": message.role,
        "text": message.text,
        "timestamp": message.timestamp,
        "renderables": message.renderables,
        "steps": message.steps,
    }


def _extract_dataset(body: bytes, target: Path) -> Path:
    """Unzip and locate the directory holding the CSV set."""
    try:
        archive = zipfile.ZipFile(io.BytesIO(body))
    except zipfile.BadZipFile as err:
        raise DatasetError(f"not a zip archive: {err}") from None
    for info in archive.infolist():
        name = Path(info.filename)
        if name.is_absolute() or ".." in name.parts:
            raise DatasetError(f"unsafe path in archive: {info.filename}")
    archive.extractall(target)
    candidates = sorted(target.rglob("plants.csv"))
    if not candidates:
        raise DatasetError("archive does not contain plants.csv")
    return candidates[0].parent


def create_app(engine: Engine | None = None, data_dir: str | Path | None = None) -> FastAPI:
    engine = engine or Engine()
    data_dir = Path(data_dir or os.environ.get("DATA_DIR", "planchat_data"))
    store = SessionStore(data_dir)

    app = FastAPI(title="planchat", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.store = store

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session() -> dict:
        session = store.create()
        return {"session_id": session.session_id}

    @app.post("/sessions/{session_id}/messages")
    async def post_message(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return JSONResponse({"detail": "body must be JSON"}, status_code=400)
        text = body.get("text", "")
        if not isinstance(text, str) or not text.strip():
            return JSONResponse({"detail": "text must be non-empty"}, status_code=400)
        lock = store.lock(session_id)
        if not lock.acquire(blocking=False):
            return JSONResponse(
                {"detail": "a message is already being processed"}, status_code=409
            )
        try:
            engine.handle_message(session, text)
            store.snapshot(session)
        finally:
            lock.release()
        return _message_payload(session)

    @app.get("/sessions/{session_id}/tasks")
    def get_tasks(session_id: str):
        session = store.get(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        return [
            {
                "seq": t.seq,
                "tool_id": t.tool_id,
                "status": t.status,
                "started": t.started,
                "finished": t.finished,
                "summary": t.summary,
            }
            for t in session.task_log
        ]

    @app.post("/sessions/{session_id}/data")
    async def ingest_data(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        body = await request.body()
        import tempfile

        with tempfile.TemporaryDirectory() as tmp:
            try:
                dataset_dir = _extract_dataset(body, Path(tmp))
                instance_id = engine.ingest_dataset(session, dataset_dir)
            except DatasetError as err:
                return JSONResponse(
                    {
                        "detail": "malformed dataset",
                        "diagnostics": [
                            {
                                "invariant": type(err).__name__,
                                "entity_id": getattr(err, "entity_id", ""),
                                "detail": str(err),
                            }
                        ],
                    },
                    status_code=400,
                )
        store.snapshot(session)
        return {"instance_id": instance_id}

    @app.get("/sessions/{session_id}/plans/{plan_id}")
    def get_plan(session_id: str, plan_id: str, format: str = "json"):
        session = store.get(session_id)
        if session is None:
            return JSONResponse({"detail": "unknown session"}, status_code=404)
        plan = session.plans.get(plan_id)
        if plan is None:
            return JSONResponse({"detail": "unknown plan"}, status_code=404)
        if format == "csv":
            return PlainTextResponse(plan_to_csv(plan), media_type="text/csv")
        if format != "json":
            return JSONResponse({"detail": "format must be json or csv"}, status_code=400)
        return plan_to_dict(plan)

    ui_dir = os.environ.get("UI_DIR", "")
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
