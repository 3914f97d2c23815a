"""Session-oriented inference service.

A session decodes one context image, runs the one-time context work (feature
bank + PIM stage features) and then answers any number of ROI restorations
against those immutable artifacts. Accounting mirrors the analytical cost
model exactly: the session stores the one-time context FLOPs, and every
restore response carries only the per-ROI increment.
"""

from __future__ import annotations

import base64
import threading
import time
import uuid
from dataclasses import dataclass, field

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import ClsrConfig
from .core.image import RoiBox
from .core.io import ImageDecodeError, decode_png_bytes, encode_png_bytes
from .flops import FlopsBreakdown, context_flops, post_crop_flops, roi_increment_flops
from .model import ClsrModel, ContextArtifacts, to_image, to_tensor


@dataclass
class Session:
    id: str
    height: int
    width: int
    artifacts: ContextArtifacts
    context: torch.Tensor
    context_cost: FlopsBreakdown
    created_at: float = field(default_factory=time.monotonic)
    last_used: float = field(default_factory=time.monotonic)
    roi_flops_spent: int = 0

    @property
    def flops_spent(self) -> FlopsBreakdown:
        return FlopsBreakdown(
            base=self.roi_flops_spent, gcm=self.context_cost.gcm, pim=self.context_cost.pim
        )


class SessionStore:
    """Thread-safe session map with LRU eviction and an idle TTL."""

    def __init__(self, model: ClsrModel, max_sessions: int, idle_ttl_s: float, max_pixels: int):
        self.model = model
        self.max_sessions = max_sessions
        self.idle_ttl_s = idle_ttl_s
        self.max_pixels = max_pixels
        self._sessions: dict[str, Session] = {}
        self._lock = threading.RLock()

    def _purge_expired(self) -> None:
        now = time.monotonic()
        for sid in [s for s, sess in self._sessions.items()
                    if now - sess.last_used > self.idle_ttl_s]:
            del self._sessions[sid]

    def evict_lru(self) -> None:
        if self._sessions:
            oldest = min(self._sessions.values(), key=lambda s: s.last_used)
            del self._sessions[oldest.id]

    def create(self, png_bytes: bytes) -> Session:
        img = decode_png_bytes(png_bytes)
        _, h, w = img.shape
        if h * w > self.max_pixels:
            raise ContextTooLarge(f"{h}x{w} exceeds the {self.max_pixels}-pixel cap")
        X = to_tensor(img)
        with torch.no_grad():
            artifacts = self.model.prepare_context(X)
        cost = context_flops(
            self.model.cfg, h, w, use_gcm=self.model.use_gcm, use_pim=self.model.use_pim
        )
        session = Session(
            id=uuid.uuid4().hex,
            height=h,
            width=w,
            artifacts=artifacts,
            context=X,
            context_cost=cost,
        )
        with self._lock:
            self._purge_expired()
            while len(self._sessions) >= self.max_sessions:
                self.evict_lru()
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            self._purge_expired()
            session = self._sessions.get(session_id)
            if session is None:
                raise UnknownSession(session_id)
            session.last_used = time.monotonic()
            return session

    def drop(self, session_id: str) -> None:
        with self._lock:
            self._sessions.pop(session_id, None)  # idempotent

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


class UnknownSession(KeyError):
    pass


class ContextTooLarge(ValueError):
    pass


class CreateSessionRequest(BaseModel):
    image_png_b64: str


class RoiRequest(BaseModel):
    top: int
    left: int
    height: int
    width: int
    pad: int | None = None


def create_app(model: ClsrModel, model_hash: str = "unsaved", cfg: ClsrConfig | None = None) -> FastAPI:
    cfg = cfg or model.cfg
    store = SessionStore(
        model,
        max_sessions=cfg.service.max_sessions,
        idle_ttl_s=cfg.service.idle_ttl_s,
        max_pixels=cfg.service.max_pixels,
    )
    app = FastAPI(title="clsr", version="0.1.0")
    app.state.store = store

    @app.post("/v1/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            png = base64.b64decode(req.image_png_b64, validate=True)
            session = store.create(png)
        except (ImageDecodeError, ValueError) as e:
            if isinstance(e, ContextTooLarge):
                raise HTTPException(status_code=413, detail=str(e))
            raise HTTPException(status_code=400, detail=f"bad image payload: {e}")
        return {
            "session_id": session.id,
            "height": session.height,
            "width": session.width,
            "context_gflops": session.context_cost.total / 1e9,
            # what a whole-image restoration would cost instead (UI baseline)
            "post_gflops": post_crop_flops(cfg, (session.height, session.width)) / 1e9,
        }

    @app.post("/v1/sessions/{session_id}/roi")
    def restore_roi(session_id: str, req: RoiRequest):
        try:
            session = store.get(session_id)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        box = RoiBox(req.top, req.left, req.height, req.width)
        try:
            box.validate(session.height, session.width)
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        pad = cfg.service.default_pad if req.pad is None else req.pad
        if pad < 0:
            raise HTTPException(status_code=422, detail="pad must be >= 0")

        started = time.perf_counter()
        with torch.no_grad():
            result = model.forward_roi(session.context, box, pad=pad, artifacts=session.artifacts)
        sr = to_image(result.sr_roi)
        elapsed_ms = (time.perf_counter() - started) * 1e3
        roi_cost = roi_increment_flops(
            cfg, box.height, box.width, session.height, session.width, pad,
            use_gcm=model.use_gcm,
        )
        session.roi_flops_spent += roi_cost
        return {
            "sr_png_b64": base64.b64encode(encode_png_bytes(sr)).decode("ascii"),
            "roi_gflops": roi_cost / 1e9,
            "elapsed_ms": elapsed_ms,
            "scale": cfg.backbone.scale,
        }

    @app.delete("/v1/sessions/{session_id}")
    def drop_session(session_id: str):
        store.drop(session_id)
        return {}

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok", "model_hash": model_hash}

    return app


def load_service(weights_path: str, cfg: ClsrConfig | None = None) -> FastAPI:
    """Build the app around one checkpoint loaded at startup."""
    from .weights import load_weights, weights_hash

    cfg = cfg or ClsrConfig().validate()
    model = ClsrModel(cfg)
    state = {k: torch.from_numpy(v) for k, v in load_weights(weights_path).items()}
    model.load_state_dict(state)
    model.eval()
    return create_app(model, model_hash=weights_hash(weights_path), cfg=cfg)
