"""Live camera control law: pose mapping, command quantization, rate
admission, zoom modes, and the zoom-to-focal-length map.

All state transitions are pure functions over immutable CameraState values;
RateGate is the one mutable piece and belongs to a single session loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import Quaternion, quaternion_to_yaw_pitch

PAN_MIN, PAN_MAX = -90.0, 90.0
TILT_MIN, TILT_MAX = 0.0, 60.0
ZOOM_MIN, ZOOM_MAX = 1.0, 7.0
ZOOM_STEP = 0.05
ANGLE_GRID = 0.5  # command quantization, half the stated accuracy band
FOCAL_MIN_MM, FOCAL_MAX_MM = 4.8, 48.2
POSE_RATE_HZ = 120.0
MAX_ZOOM_RATE = 2.0  # zoom units per second

_ZOOM_STEPS = round((ZOOM_MAX - ZOOM_MIN) / ZOOM_STEP)


def focal_from_zoom(z: float) -> float:
    """Linear zoom-to-focal map over the printed lens range."""
    if not ZOOM_MIN <= z <= ZOOM_MAX:
        raise ValueError(f"zoom {z} outside [{ZOOM_MIN}, {ZOOM_MAX}]")
    if z == ZOOM_MAX:
        return FOCAL_MAX_MM  # exact endpoint, no float residue
    return FOCAL_MIN_MM + (z - ZOOM_MIN) * (FOCAL_MAX_MM - FOCAL_MIN_MM) / (ZOOM_MAX - ZOOM_MIN)


@dataclass(frozen=True)
class CameraState:
    pan: float = 0.0
    tilt: float = 0.0
    zoom: float = 1.0
    last_update_ms: float = 0.0

    def __post_init__(self):
        if not PAN_MIN <= self.pan <= PAN_MAX:
            raise ValueError(f"pan {self.pan} outside [{PAN_MIN}, {PAN_MAX}]")
        if not TILT_MIN <= self.tilt <= TILT_MAX:
            raise ValueError(f"tilt {self.tilt} outside [{TILT_MIN}, {TILT_MAX}]")
        if not ZOOM_MIN <= self.zoom <= ZOOM_MAX:
            raise ValueError(f"zoom {self.zoom} outside [{ZOOM_MIN}, {ZOOM_MAX}]")

    @property
    def focal_mm(self) -> float:
        return focal_from_zoom(self.zoom)


def _round_half_away(x: float) -> float:
    return math.copysign(math.floor(abs(x) + 0.5), x)


def clamp_quantize(yaw: float, pitch: float) -> tuple[float, float]:
    """Clamp to gimbal ranges, then snap to the 0.5-degree command grid.

    Ties round away from zero; the result is within 0.25 degrees of the
    clamped input.
    """
    if not (math.isfinite(yaw) and math.isfinite(pitch)):
        raise ValueError("angles must be finite")
    pan = min(max(yaw, PAN_MIN), PAN_MAX)
    tilt = min(max(pitch, TILT_MIN), TILT_MAX)
    pan = _round_half_away(pan / ANGLE_GRID) * ANGLE_GRID
    tilt = _round_half_away(tilt / ANGLE_GRID) * ANGLE_GRID
    return pan, tilt


def map_pose(q: Quaternion, s: CameraState, t_ms: float | None = None) -> CameraState:
    """New camera state pointing where the headset points; zoom untouched.

    In the gimbal-lock region the pan is held at its previous value and only
    the tilt is updated.
    """
    yp = quaternion_to_yaw_pitch(q)
    pan, tilt = clamp_quantize(yp.yaw_deg, yp.pitch_deg)
    if yp.gimbal_lock:
        pan = s.pan
    return replace(s, pan=pan, tilt=tilt,
                   last_update_ms=s.last_update_ms if t_ms is None else t_ms)


def zoom_step(s: CameraState, direction: int) -> CameraState:
    """Step the zoom one 0.05 increment, clamped to [1, 7].

    Zoom is kept on the exact increment grid by counting steps as integers,
    so long up/down sequences cannot accumulate float drift.
    """
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {direction}")
    n = round((s.zoom - ZOOM_MIN) / ZOOM_STEP) + direction
    n = min(max(n, 0), _ZOOM_STEPS)
    return replace(s, zoom=round(ZOOM_MIN + n * ZOOM_STEP, 9))


def zoom_rate(s: CameraState, v: float, dt_ms: float) -> CameraState:
    """Continuous zoom at v units/second for dt_ms; no increment grid."""
    if dt_ms < 0:
        raise ValueError(f"dt_ms must be non-negative, got {dt_ms}")
    if abs(v) > MAX_ZOOM_RATE:
        raise ValueError(f"|zoom rate| must be <= {MAX_ZOOM_RATE}, got {v}")
    z = s.zoom + v * dt_ms / 1000.0
    return replace(s, zoom=min(max(z, ZOOM_MIN), ZOOM_MAX))


class RateGate:
    """Admission control holding a sustained 120 Hz update rate.

    Fixed-frequency deadline scheduler: an update is accepted once the
    running deadline has passed, and the deadline then advances by exactly
    one interval (with at most one interval of carried credit after a lull).
    Unlike gating on ``last_accept + interval``, the carried fraction lets a
    uniform 1 kHz stream sustain the full 120 updates/s instead of
    quantizing down to 1000/ceil(8.33) = 111.
    """

    def __init__(self, rate_hz: float = POSE_RATE_HZ):
        if rate_hz <= 0:
            raise ValueError("rate must be positive")
        self.min_interval_ms = 1000.0 / rate_hz
        self.last_accept_ms: float | None = None
        self._deadline_ms: float | None = None
        self._last_seen_ms: float | None = None
        self.regressions = 0

    def admit(self, t_ms: float) -> bool:
        """Accept iff the rate law allows an update at ``t_ms``.

        Time regressions are rejected and counted.
        """
        if self._last_seen_ms is not None and t_ms < self._last_seen_ms:
            self.regressions += 1
            return False
        self._last_seen_ms = t_ms
        if self._deadline_ms is not None and t_ms < self._deadline_ms:
            return False
        if self._deadline_ms is None:
            self._deadline_ms = t_ms + self.min_interval_ms
        else:
            self._deadline_ms = max(self._deadline_ms + self.min_interval_ms, t_ms)
        self.last_accept_ms = t_ms
        return True
