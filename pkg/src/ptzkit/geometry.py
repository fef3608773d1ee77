"""2D image-plane geometry and orientation math for the PTZ engine.

Conventions
-----------
* Image coordinates are continuous, origin top-left, x right, y down, in
  pixels.  Sub-pixel positions are preserved everywhere; rounding happens
  only at resampling time.
* Affine transforms are 3x3 homogeneous matrices acting on column vectors,
  mapping source coordinates to output coordinates.
* Orientation quaternions are Hamilton (w, x, y, z), +Z up, +X forward.
  Yaw rotates about +Z, pitch about +Y; decomposition is intrinsic Z-Y-X
  and roll is discarded (a two-axis gimbal cannot express it).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

GIMBAL_LOCK_MARGIN_DEG = 0.01


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in continuous pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"bounding box must be finite, got {vals}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"bounding box min exceeds max: {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class FrameSize:
    """Integer frame dimensions in pixels."""

    w: int
    h: int

    def __post_init__(self):
        if self.w < 2 or self.h < 2:
            raise ValueError(f"frame size must be at least 2x2, got {self.w}x{self.h}")

    @property
    def center(self) -> tuple[float, float]:
        return self.w / 2.0, self.h / 2.0


@dataclass(frozen=True)
class Affine2D:
    """3x3 homogeneous transform with bottom row (0, 0, 1)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"affine matrix must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("affine matrix must be finite")
        if tuple(m[2]) != (0.0, 0.0, 1.0):
            raise ValueError(f"affine bottom row must be (0, 0, 1), got {m[2]}")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @staticmethod
    def identity() -> "Affine2D":
        return Affine2D(np.eye(3))

    @staticmethod
    def translation(tx: float, ty: float) -> "Affine2D":
        return Affine2D(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    def apply(self, x: float, y: float) -> tuple[float, float]:
        p = self.m @ (x, y, 1.0)
        return float(p[0]), float(p[1])

    def inverse(self) -> "Affine2D":
        det = self.m[0, 0] * self.m[1, 1] - self.m[0, 1] * self.m[1, 0]
        if abs(det) < 1e-12:
            raise ValueError("affine transform is singular")
        inv = np.linalg.inv(self.m)
        inv[2] = (0.0, 0.0, 1.0)  # squash inversion noise in the fixed row
        return Affine2D(inv)


@dataclass(frozen=True)
class Quaternion:
    """Hamilton quaternion (w, x, y, z)."""

    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if not math.isfinite(n) or n < 1e-9:
            raise ValueError(f"cannot normalize quaternion with norm {n}")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def __mul__(self, o: "Quaternion") -> "Quaternion":
        return Quaternion(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )


class YawPitch(NamedTuple):
    yaw_deg: float
    pitch_deg: float
    gimbal_lock: bool


def bbox_center(b: BoundingBox) -> tuple[float, float]:
    """Exact midpoint of a bounding box, no rounding."""
    return (b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0


def recenter_transform(b: BoundingBox, f: FrameSize) -> Affine2D:
    """Translation moving the box center onto the frame center."""
    xc, yc = bbox_center(b)
    return Affine2D.translation(f.w / 2.0 - xc, f.h / 2.0 - yc)


def zoom_transform(s: float, f: FrameSize) -> Affine2D:
    """Isotropic scale by ``s`` about the frame center.

    The frame center is a fixed point; distances scale by exactly ``s``.
    """
    if not math.isfinite(s) or s <= 0:
        raise ValueError(f"zoom scale must be finite and positive, got {s}")
    cx, cy = f.center
    return Affine2D(
        np.array(
            [
                [s, 0.0, (1.0 - s) * cx],
                [0.0, s, (1.0 - s) * cy],
                [0.0, 0.0, 1.0],
            ]
        )
    )


def compose(a: Affine2D, b: Affine2D) -> Affine2D:
    """Transform applying ``b`` first, then ``a``."""
    return Affine2D(a.m @ b.m)


def quaternion_to_yaw_pitch(q: Quaternion) -> YawPitch:
    """Intrinsic Z-Y-X decomposition; returns (yaw, pitch) in degrees.

    Yaw lies in (-180, 180], pitch in [-90, 90]; roll is discarded.  Within
    0.01 degrees of |pitch| = 90 the yaw/roll split is degenerate: yaw is
    defined as 0 by convention and the gimbal_lock flag is set.
    """
    q = q.normalized()
    w, x, y, z = q.w, q.x, q.y, q.z
    sin_pitch = 2.0 * (w * y - x * z)
    sin_pitch = max(-1.0, min(1.0, sin_pitch))
    pitch = math.degrees(math.asin(sin_pitch))
    if abs(pitch) >= 90.0 - GIMBAL_LOCK_MARGIN_DEG:
        return YawPitch(0.0, pitch, True)
    yaw = math.degrees(math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z)))
    if yaw <= -180.0:
        yaw += 360.0
    return YawPitch(yaw, pitch, False)


def quaternion_from_yaw_pitch(yaw_deg: float, pitch_deg: float) -> Quaternion:
    """Quaternion for an intrinsic Z-Y rotation (roll zero)."""
    hy = math.radians(yaw_deg) / 2.0
    hp = math.radians(pitch_deg) / 2.0
    qz = Quaternion(math.cos(hy), 0.0, 0.0, math.sin(hy))
    qy = Quaternion(math.cos(hp), 0.0, math.sin(hp), 0.0)
    return qz * qy
