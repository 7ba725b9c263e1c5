"""HTTP and WebSocket gateway exposing a running session to browser clients.

Binary frame streaming uses a fixed 22-byte big-endian header followed by
the raw RGB24 pixels:

    magic "MCAM" (4) | version (1) | peer id (1, ASCII) |
    width (2) | height (2) | seq (4) | timestamp_us (8)

View state, camera listings, and the advance/IM controls are plain JSON
endpoints.  The session runs on the wall clock; every read and mutation is
serialized through one lock, so a GET issued after a POST returns always
reflects that command.
"""

from __future__ import annotations

import asyncio
import logging
import struct
import threading
import time

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .frame import Frame, Resolution
from .session import NoFrameYetError, Session, SessionConfig, create_session
from .switching import ViewMode

logger = logging.getLogger(__name__)

FRAME_MAGIC = b"MCAM"
FRAME_VERSION = 1
_HEADER = struct.Struct(">4sBBHHIQ")
FRAME_HEADER_LEN = _HEADER.size

DEFAULT_STREAM_FPS = 10.0


class BindError(Exception):
    """The requested interface address could not be bound."""


def encode_frame_message(peer_id: str, frame: Frame) -> bytes:
    """Header plus raw RGB24 body; see the module docstring for the layout."""
    if len(peer_id) != 1:
        raise ValueError(f"peer id must be one character, got {peer_id!r}")
    header = _HEADER.pack(
        FRAME_MAGIC,
        FRAME_VERSION,
        ord(peer_id),
        frame.resolution.width,
        frame.resolution.height,
        frame.seq & 0xFFFFFFFF,
        frame.timestamp_us,
    )
    return header + frame.to_bytes()


def decode_frame_message(data: bytes) -> tuple[str, Frame]:
    if len(data) < FRAME_HEADER_LEN:
        raise ValueError(f"frame message shorter than its {FRAME_HEADER_LEN}-byte header")
    magic, version, peer_byte, width, height, seq, timestamp_us = _HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != FRAME_VERSION:
        raise ValueError(f"unsupported frame message version {version}")
    body = data[FRAME_HEADER_LEN:]
    expected = width * height * 3
    if len(body) != expected:
        raise ValueError(f"body length {len(body)} != {expected} for {width}x{height}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3).copy()
    frame = Frame(Resolution(width, height), pixels, seq=seq, timestamp_us=timestamp_us)
    return chr(peer_byte), frame


class SessionRunner:
    """Owns a session on the wall clock.

    A background thread advances the virtual core to the current wall time
    every few milliseconds; HTTP handlers take the same lock, advance to
    now, and then read or mutate, which is what serializes every command.
    """

    def __init__(self, config: SessionConfig) -> None:
        self.session: Session = create_session(config)
        self._lock = threading.Lock()
        self._t0 = time.monotonic()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _now_us(self) -> int:
        return int((time.monotonic() - self._t0) * 1_000_000)

    def start(self) -> None:
        if self._thread is not None:
            return
        self._thread = threading.Thread(target=self._run, name="session-clock", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    def _run(self) -> None:
        while not self._stop.wait(0.005):
            with self._lock:
                self.session.step_to(self._now_us())

    def _locked_session(self) -> Session:
        # Callers hold self._lock already.
        self.session.step_to(self._now_us())
        return self.session

    def peer_ids(self) -> tuple[str, ...]:
        return self.session.peer_ids()

    def _check_peer(self, peer_id: str) -> None:
        if peer_id not in self.session.peer_ids():
            raise KeyError(peer_id)

    def state(self, peer_id: str) -> dict:
        self._check_peer(peer_id)
        with self._lock:
            session = self._locked_session()
            prt = session.peer(peer_id)
            state = prt.pipeline.state
            payload = {
                "peer": peer_id,
                "mode": state.mode.value,
                "num_cams": len(prt.registry),
                "strategy": prt.pipeline.strategy.value,
            }
            if state.mode is ViewMode.PRIMARY:
                payload["primary_ordinal"] = state.primary_ordinal
            return payload

    def cameras(self, peer_id: str) -> list[dict]:
        self._check_peer(peer_id)
        with self._lock:
            session = self._locked_session()
            out = []
            for entry in session.peer(peer_id).registry:
                out.append(
                    {
                        "ordinal": entry.ordinal,
                        "name": entry.spec.name,
                        "width": entry.selected.resolution.width,
                        "height": entry.selected.resolution.height,
                        "fps": entry.selected.fps,
                        "format": entry.selected.format.value,
                        "warm_up_ms": entry.spec.warm_up_ms,
                        "latency_ms": entry.spec.latency_ms,
                    }
                )
            return out

    def advance(self, peer_id: str, target: str) -> None:
        self._check_peer(peer_id)
        with self._lock:
            session = self._locked_session()
            if not session.can_advance(peer_id, target):
                raise PermissionError(f"no control path for {target} advance from {peer_id}")
            session.request_advance(peer_id, target)

    def send_im(self, peer_id: str, text: str) -> None:
        self._check_peer(peer_id)
        with self._lock:
            self._locked_session().deliver_im(peer_id, text)

    def latest_frame(self, peer_id: str) -> Frame | None:
        self._check_peer(peer_id)
        with self._lock:
            session = self._locked_session()
            try:
                return session.current_view(peer_id)
            except NoFrameYetError:
                return None


class ImBody(BaseModel):
    text: str = ""


def create_app(runner: SessionRunner, stream_fps: float = DEFAULT_STREAM_FPS) -> FastAPI:
    """REST + WebSocket app over a started runner."""
    if stream_fps <= 0:
        raise ValueError("stream fps must be positive")
    app = FastAPI(title="mcam gateway")

    def _peer_or_404(peer_id: str) -> str:
        if peer_id not in runner.peer_ids():
            raise HTTPException(status_code=404, detail=f"unknown peer {peer_id!r}")
        return peer_id

    @app.get("/api/peers")
    def peers() -> list[str]:
        return list(runner.peer_ids())

    @app.get("/api/{peer_id}/state")
    def state(peer_id: str) -> dict:
        return runner.state(_peer_or_404(peer_id))

    @app.get("/api/{peer_id}/cameras")
    def cameras(peer_id: str) -> list[dict]:
        return runner.cameras(_peer_or_404(peer_id))

    @app.post("/api/{peer_id}/advance/local", status_code=202)
    def advance_local(peer_id: str) -> dict:
        try:
            runner.advance(_peer_or_404(peer_id), "local")
        except PermissionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"status": "accepted"}

    @app.post("/api/{peer_id}/advance/remote", status_code=202)
    def advance_remote(peer_id: str) -> dict:
        try:
            runner.advance(_peer_or_404(peer_id), "remote")
        except PermissionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"status": "accepted"}

    @app.post("/api/{peer_id}/im", status_code=202)
    def send_im(peer_id: str, body: ImBody) -> dict:
        runner.send_im(_peer_or_404(peer_id), body.text)
        return {"status": "accepted"}

    @app.websocket("/api/{peer_id}/view")
    async def view_stream(websocket: WebSocket, peer_id: str) -> None:
        if peer_id not in runner.peer_ids():
            await websocket.close(code=4404)
            return
        await websocket.accept()
        interval = 1.0 / stream_fps
        last_seq = None
        try:
            while True:
                frame = runner.latest_frame(peer_id)
                if frame is not None and frame.seq != last_seq:
                    # Latest-wins: anything composed between sends is skipped.
                    await websocket.send_bytes(encode_frame_message(peer_id, frame))
                    last_seq = frame.seq
                await asyncio.sleep(interval)
        except WebSocketDisconnect:
            return

    return app


def serve(
    config: SessionConfig,
    bind: str = "127.0.0.1:8000",
    stream_fps: float = DEFAULT_STREAM_FPS,
) -> None:
    """Run the gateway until interrupted (wall-clock sessions only)."""
    import uvicorn

    if config.clock != "wall":
        raise ValueError("serve() needs a wall-clock session config")
    host, _, port_text = bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise BindError(f"bind address must look like host:port, got {bind!r}")
    runner = SessionRunner(config)
    runner.start()
    app = create_app(runner)
    try:
        uvicorn.run(app, host=host, port=int(port_text), log_level="info")
    except (OSError, SystemExit) as exc:
        raise BindError(f"cannot serve on {bind}: {exc}") from exc
    finally:
        runner.stop()
