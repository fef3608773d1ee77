"""Teleoperation session core: a sequential state machine over JSON
messages and clock ticks.

The session owns the camera state, the pose admission gate, the frame
cadence, and the episode recorder.  It performs no I/O of its own beyond
episode writing; the network layer (see :mod:`ptzkit.server`) feeds it
messages and ticks and ships the outbound messages it returns.  Malformed
or out-of-contract input never raises: it yields an ``error`` message and
the session carries on.
"""

from __future__ import annotations

import base64
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .camera_sim import WorldScene, render_frame
from .dataset import EpisodeManifest, EpisodeRecord, EpisodeWriter
from .frames import encode_png
from .geometry import FrameSize, Quaternion
from .gimbal import (
    MAX_ZOOM_RATE,
    CameraState,
    RateGate,
    map_pose,
    zoom_rate,
    zoom_step,
)

FRAME_RATE_HZ = 60.0
FRAME_INTERVAL_MS = 1000.0 / FRAME_RATE_HZ
PROTO_VERSION = 1

_NAME_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


@dataclass
class Session:
    scene: WorldScene
    out_size: FrameSize = field(default_factory=lambda: FrameSize(640, 360))
    sessions_dir: Path = Path("episodes")
    camera: CameraState = field(default_factory=CameraState)
    gate: RateGate = field(default_factory=RateGate)
    zoom_velocity: float = 0.0
    recording: EpisodeWriter | None = None
    recording_name: str | None = None
    state_seq: int = 0
    frame_seq: int = 0
    last_frame_ms: float | None = None
    last_tick_ms: float | None = None

    # -- outbound message builders ------------------------------------

    def state_message(self) -> dict:
        self.state_seq += 1
        return {
            "type": "state",
            "pan": self.camera.pan,
            "tilt": self.camera.tilt,
            "zoom": self.camera.zoom,
            "focal_mm": self.camera.focal_mm,
            "seq": self.state_seq,
            "recording": self.recording is not None,
        }

    @staticmethod
    def _error(code: str, msg: str) -> dict:
        return {"type": "error", "code": code, "msg": msg}

    # -- inbound handling ----------------------------------------------

    def handle_raw(self, text: str) -> list[dict]:
        """Parse one wire message and handle it; never raises."""
        try:
            msg = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            return [self._error("bad_json", f"unparseable message: {exc}")]
        if not isinstance(msg, dict):
            return [self._error("bad_json", "message must be a JSON object")]
        try:
            return self.handle_message(msg)
        except Exception as exc:  # contract: the session never dies
            return [self._error("internal", f"{type(exc).__name__}: {exc}")]

    def handle_message(self, msg: dict) -> list[dict]:
        mtype = msg.get("type")
        if mtype == "hello":
            return self._on_hello(msg)
        if mtype == "pose":
            return self._on_pose(msg)
        if mtype == "zoom":
            return self._on_zoom(msg)
        if mtype == "record":
            return self._on_record(msg)
        return [self._error("unsupported", f"unknown message type {mtype!r}")]

    def _on_hello(self, msg: dict) -> list[dict]:
        if msg.get("role") not in ("operator", "viewer"):
            return [self._error("bad_hello", "role must be operator or viewer")]
        if msg.get("proto") != PROTO_VERSION:
            return [self._error("bad_hello", f"unsupported proto {msg.get('proto')!r}")]
        return [self.state_message()]

    def _on_pose(self, msg: dict) -> list[dict]:
        q = msg.get("q")
        t_ms = msg.get("t_ms")
        if not (isinstance(q, list) and len(q) == 4 and all(_is_num(v) for v in q)):
            return [self._error("bad_pose", "q must be [w, x, y, z] finite numbers")]
        if not _is_num(t_ms) or t_ms < 0:
            return [self._error("bad_pose", "t_ms must be a non-negative number")]
        if not self.gate.admit(float(t_ms)):
            return []  # over-rate updates are dropped silently
        try:
            quat = Quaternion(*(float(v) for v in q)).normalized()
        except ValueError as exc:
            return [self._error("bad_pose", str(exc))]
        self.camera = map_pose(quat, self.camera, t_ms=float(t_ms))
        return [self.state_message()]

    def _on_zoom(self, msg: dict) -> list[dict]:
        mode = msg.get("mode")
        if mode == "step":
            if msg.get("dir") not in (-1, 1):
                return [self._error("bad_zoom", "dir must be -1 or 1")]
            self.camera = zoom_step(self.camera, msg["dir"])
            return [self.state_message()]
        if mode == "rate":
            v = msg.get("v")
            if not _is_num(v) or abs(v) > MAX_ZOOM_RATE:
                return [self._error("bad_zoom", f"v must be a number within +-{MAX_ZOOM_RATE}")]
            dt_ms = msg.get("dt_ms")
            if dt_ms is not None:
                if not _is_num(dt_ms) or dt_ms < 0:
                    return [self._error("bad_zoom", "dt_ms must be non-negative")]
                self.camera = zoom_rate(self.camera, float(v), float(dt_ms))
                self.zoom_velocity = 0.0
                return [self.state_message()]
            self.zoom_velocity = float(v)  # integrated at ticks
            return [self.state_message()]
        return [self._error("bad_zoom", f"unknown zoom mode {mode!r}")]

    def _on_record(self, msg: dict) -> list[dict]:
        action = msg.get("action")
        if action == "start":
            if self.recording is not None:
                return [self._error("already_recording", f"recording {self.recording_name!r}")]
            name = msg.get("name")
            if not isinstance(name, str) or not _NAME_RE.match(name):
                return [self._error("bad_record", "name must match [A-Za-z0-9_-]{1,64}")]
            manifest = EpisodeManifest(
                name=name,
                frame_rate_hz=FRAME_RATE_HZ,
                frame_size=(self.out_size.w, self.out_size.h),
                layout=("top",),
                arms_present=False,
            )
            self.recording = EpisodeWriter(Path(self.sessions_dir) / name, manifest)
            self.recording_name = name
            return [self.state_message()]
        if action == "stop":
            if self.recording is None:
                return [self._error("not_recording", "no active recording")]
            self.recording.finalize()
            self.recording = None
            self.recording_name = None
            return [self.state_message()]
        return [self._error("bad_record", f"unknown record action {action!r}")]

    # -- clock ----------------------------------------------------------

    def tick(self, t_ms: float) -> list[dict]:
        """Advance the session clock; emit at most one frame per 1/60 s.

        Continuous zoom is integrated across tick intervals.  Non-monotone
        ticks are ignored.
        """
        if self.last_tick_ms is not None and t_ms < self.last_tick_ms:
            return []
        if self.last_tick_ms is not None and self.zoom_velocity != 0.0:
            self.camera = zoom_rate(self.camera, self.zoom_velocity, t_ms - self.last_tick_ms)
        self.last_tick_ms = t_ms

        # small epsilon tolerates float jitter in tick clocks at the boundary
        if self.last_frame_ms is not None and t_ms - self.last_frame_ms < FRAME_INTERVAL_MS - 1e-6:
            return []
        self.last_frame_ms = t_ms

        frame = render_frame(self.scene, self.camera, self.out_size)
        png = encode_png(frame)
        out = [
            {
                "type": "frame",
                "seq": self.frame_seq,
                "encoding": "png_b64",
                "data": base64.b64encode(png).decode("ascii"),
            }
        ]
        self.frame_seq += 1
        if self.zoom_velocity != 0.0:
            out.insert(0, self.state_message())

        if self.recording is not None:
            rec = EpisodeRecord(
                t_ms=int(t_ms),
                gimbal_pitch=self.camera.tilt,
                gimbal_yaw=self.camera.pan,
                zoom=self.camera.zoom,
                focal_mm=self.camera.focal_mm,
                zoom_affine=_zoom_affine(self.camera.zoom, self.out_size),
            )
            try:
                self.recording.append(rec, views={"top": png})
            except Exception as exc:
                out.append(self._error("record_failed", str(exc)))
                self.recording = None
                self.recording_name = None
        return out


def _zoom_affine(z: float, f: FrameSize) -> list[list[float]]:
    from .geometry import zoom_transform

    return [[float(v) for v in row] for row in zoom_transform(z, f).m]
