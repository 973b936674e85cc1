"""HTTP service for diagnosis and follow-up sessions.

JSON over HTTP/1.1 under /api/v1. Sessions are held in memory with idle
TTL eviction; model parameters are shared read-only across requests and a
per-session lock serializes concurrent asks (the loser gets 409).
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from vibrodiag.corpusgen import LABEL_SETS, LabelSet
from vibrodiag.diagnose import DialogueSession, follow_up, open_session
from vibrodiag.errors import MalformedWav
from vibrodiag.net.model import ModelParams
from vibrodiag.sigproc import parse_wav_bytes

DEFAULT_SESSION_TTL_S = 30 * 60
MAX_CLIP_SECONDS = 60.0
MAX_UPLOAD_BYTES = 64 * 1024 * 1024


@dataclass
class ApiSession:
    session: DialogueSession
    created_at: float
    last_active: float
    lock: threading.Lock = field(default_factory=threading.Lock)


class AskRequest(BaseModel):
    question: str


def create_app(
    ckpt_path: str | None = None,
    label_set_name: str = "toy4",
    static_dir: str | None = None,
    params: ModelParams | None = None,
    label_set: LabelSet | None = None,
    session_ttl_s: float = DEFAULT_SESSION_TTL_S,
    clock=time.monotonic,
) -> FastAPI:
    """Build the service; the model may be injected directly or loaded from disk."""
    app = FastAPI(title="vibrodiag gateway")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    if params is None and ckpt_path is not None:
        from vibrodiag.errors import VibrodiagError
        from vibrodiag.optim import load_checkpoint

        try:
            params, manifest = load_checkpoint(ckpt_path)
            label_set_name = manifest.get("extra", {}).get("label_set", label_set_name)
        except (OSError, VibrodiagError):
            params = None  # service starts; health and diagnose answer 503
    if label_set is None:
        label_set = LABEL_SETS[label_set_name]

    state = {
        "params": params,
        "label_set": label_set,
        "ckpt_path": ckpt_path,
        "sessions": {},
        "store_lock": threading.Lock(),
        "ttl": session_ttl_s,
        "clock": clock,
    }
    app.state.vibrodiag = state

    def _evict_expired():
        now = state["clock"]()
        with state["store_lock"]:
            expired = [
                sid for sid, s in state["sessions"].items()
                if now - s.last_active > state["ttl"]
            ]
            for sid in expired:
                del state["sessions"][sid]

    def _require_model() -> ModelParams:
        if state["params"] is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return state["params"]

    @app.get("/api/v1/health")
    def health():
        if state["params"] is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "status": "ok",
            "checkpoint": state["ckpt_path"],
            "model_config": state["params"].config.to_dict(),
        }

    @app.post("/api/v1/diagnose")
    def diagnose_endpoint(file: UploadFile = File(...)):
        model = _require_model()
        raw = file.file.read(MAX_UPLOAD_BYTES + 1)
        if len(raw) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail="upload too large")
        try:
            clip = parse_wav_bytes(raw)
        except MalformedWav as exc:
            raise HTTPException(status_code=400, detail=f"malformed wav: {exc}") from exc
        if len(clip) > MAX_CLIP_SECONDS * clip.sample_rate_hz:
            raise HTTPException(status_code=413, detail="clip longer than 60 s")
        session, diagnosis = open_session(
            model, clip, state["label_set"], session_id=uuid.uuid4().hex
        )
        now = state["clock"]()
        with state["store_lock"]:
            state["sessions"][session.session_id] = ApiSession(
                session=session, created_at=now, last_active=now
            )
        _evict_expired()
        return {
            "session_id": session.session_id,
            "raw_text": diagnosis.raw_text,
            "label": diagnosis.parsed_label,
            "parse_status": diagnosis.match_mode or "unparseable",
        }

    @app.post("/api/v1/sessions/{session_id}/ask")
    def ask_endpoint(session_id: str, body: AskRequest):
        model = _require_model()
        _evict_expired()
        with state["store_lock"]:
            api_session = state["sessions"].get(session_id)
        if api_session is None:
            raise HTTPException(status_code=404, detail="unknown or expired session")
        if not api_session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="session busy")
        try:
            answer = follow_up(api_session.session, body.question, model)
            api_session.last_active = state["clock"]()
            return {"answer": answer, "turn_index": len(api_session.session.history)}
        finally:
            api_session.lock.release()

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
