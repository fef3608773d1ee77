"""WebSocket service around the teleop session core.

One session per server instance.  The first connection saying hello as
"operator" drives the camera; every other connection is a viewer and
receives state and frames only.  A background task ticks the session off
the wall clock at the frame cadence.
"""

from __future__ import annotations

import asyncio
import importlib.resources
import json
import logging
import time
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse

from .camera_sim import make_scene, scene_info
from .geometry import FrameSize
from .teleop import Session

logger = logging.getLogger(__name__)

CONTROL_TYPES = ("pose", "zoom", "record")


def protocol_schema() -> dict:
    with importlib.resources.files("ptzkit").joinpath("protocol.schema.json").open() as fh:
        return json.load(fh)


def create_app(seed: int = 0, n_targets: int = 2, size: tuple[int, int] = (640, 360),
               sessions_dir: str = "episodes", console_dir: str | None = None,
               tick_hz: float = 240.0) -> FastAPI:
    scene = make_scene(seed=seed, n_targets=n_targets)
    session = Session(
        scene=scene,
        out_size=FrameSize(*size),
        sessions_dir=Path(sessions_dir),
    )
    clients: dict[WebSocket, str] = {}
    lock = asyncio.Lock()

    async def broadcast(messages: list[dict]) -> None:
        if not messages:
            return
        data = [json.dumps(m) for m in messages]
        dead = []
        for ws in list(clients):
            try:
                for d in data:
                    await ws.send_text(d)
            except Exception:
                dead.append(ws)
        for ws in dead:
            clients.pop(ws, None)

    async def ticker() -> None:
        try:
            while True:
                async with lock:
                    out = session.tick(time.monotonic() * 1000.0)
                await broadcast(out)
                await asyncio.sleep(1.0 / tick_hz)
        except asyncio.CancelledError:
            pass

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(ticker())
        yield
        task.cancel()
        if session.recording is not None:
            session.recording.finalize()
            session.recording = None

    app = FastAPI(lifespan=lifespan)
    app.state.session = session

    @app.get("/scene.json")
    async def _scene() -> JSONResponse:
        return JSONResponse(scene_info(scene))

    @app.get("/protocol.schema.json")
    async def _schema() -> JSONResponse:
        return JSONResponse(protocol_schema())

    if console_dir and (Path(console_dir) / "index.html").exists():
        console = Path(console_dir)

        @app.get("/")
        async def _index() -> FileResponse:
            return FileResponse(console / "index.html")

        @app.get("/static/{name:path}")
        async def _static(name: str):
            target = (console / name).resolve()
            if not str(target).startswith(str(console.resolve())) or not target.is_file():
                return HTMLResponse("not found", status_code=404)
            return FileResponse(target)

    @app.websocket("/session")
    async def _session_ws(ws: WebSocket) -> None:
        await ws.accept()
        role = "viewer"
        clients[ws] = role
        try:
            while True:
                text = await ws.receive_text()
                # Role assignment happens on hello; only one operator drives.
                probe = None
                try:
                    probe = json.loads(text)
                except json.JSONDecodeError:
                    pass
                if isinstance(probe, dict) and probe.get("type") == "hello":
                    wants = probe.get("role")
                    if wants == "operator" and "operator" not in clients.values():
                        clients[ws] = "operator"
                    elif wants == "operator":
                        clients[ws] = "viewer"
                        await ws.send_text(json.dumps({
                            "type": "error", "code": "operator_taken",
                            "msg": "an operator is already connected; joining as viewer",
                        }))
                elif (
                    isinstance(probe, dict)
                    and probe.get("type") in CONTROL_TYPES
                    and clients.get(ws) != "operator"
                ):
                    await ws.send_text(json.dumps({
                        "type": "error", "code": "forbidden",
                        "msg": "viewers cannot send control messages",
                    }))
                    continue
                async with lock:
                    out = session.handle_raw(text)
                for msg in out:
                    await ws.send_text(json.dumps(msg))
        except WebSocketDisconnect:
            pass
        finally:
            clients.pop(ws, None)

    return app
