"""Active-vision pan-tilt-zoom toolkit.

Desk-scale engine for an active-vision camera workflow: detect a task
target, re-center it, zoom, super-resolve, and verify the output format;
record and process teleoperation episodes; drive a simulated PTZ camera
live over WebSocket.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    Affine2D,
    BoundingBox,
    FrameSize,
    Quaternion,
    bbox_center,
    compose,
    quaternion_from_yaw_pitch,
    quaternion_to_yaw_pitch,
    recenter_transform,
    zoom_transform,
)
from .frames import FormatSpec, ImageFrame  # noqa: F401
from .gimbal import CameraState, RateGate  # noqa: F401
from .warp import ZoomParams, compute_scale_factor, crop_and_fill  # noqa: F401
