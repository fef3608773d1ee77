"""Synthetic episode generation: a seeded scene and a scripted camera
trajectory that keeps a chosen target in frame but wandering off-center.
"""

from __future__ import annotations

import math
from pathlib import Path

from .camera_sim import WorldScene, aim_angles, make_scene, render_frame
from .dataset import EpisodeManifest, EpisodeRecord, EpisodeWriter
from .geometry import FrameSize, zoom_transform
from .gimbal import CameraState, clamp_quantize

# Wander amplitudes keep the target inside the crop at zoom 1 with margin
# for the 0.5-degree command quantization and target radius.
PAN_WANDER_DEG = 11.0
TILT_WANDER_DEG = 2.5


def scripted_states(scene: WorldScene, frames: int, target_id: int = 0,
                    out_size: FrameSize | None = None) -> list[CameraState]:
    """Camera states aiming near the target with a slow figure-sweep."""
    out_size = out_size or FrameSize(640, 360)
    if scene.targets:
        aim_pan, aim_tilt = aim_angles(scene, target_id, out_size)
    else:
        aim_pan, aim_tilt = 0.0, 30.0
    states = []
    for k in range(frames):
        phase = 2.0 * math.pi * k / max(frames, 1)
        pan = aim_pan + PAN_WANDER_DEG * math.sin(phase)
        tilt = aim_tilt + TILT_WANDER_DEG * math.cos(2.0 * phase)
        pan, tilt = clamp_quantize(pan, tilt)
        states.append(CameraState(pan=pan, tilt=tilt, zoom=1.0))
    return states


def synth_episode(out_dir, seed: int = 0, frames: int = 20, n_targets: int = 1,
                  out_size: FrameSize | None = None,
                  frame_rate_hz: float = 30.0,
                  scene: WorldScene | None = None) -> EpisodeManifest:
    """Write a fully valid synthetic episode; deterministic per seed.

    The camera tracks target 0 (with a wandering offset), so that target's
    color is the natural task label when processing the episode.
    """
    out_size = out_size or FrameSize(640, 360)
    scene = scene or make_scene(seed=seed, n_targets=n_targets)
    states = scripted_states(scene, frames, out_size=out_size)
    manifest = EpisodeManifest(
        name=Path(out_dir).name,
        frame_rate_hz=frame_rate_hz,
        frame_size=(out_size.w, out_size.h),
        layout=("top",),
        arms_present=False,
    )
    writer = EpisodeWriter(out_dir, manifest)
    dt_ms = 1000.0 / frame_rate_hz
    for k, cam in enumerate(states):
        frame = render_frame(scene, cam, out_size)
        rec = EpisodeRecord(
            t_ms=int(round(k * dt_ms)),
            gimbal_pitch=cam.tilt,
            gimbal_yaw=cam.pan,
            zoom=cam.zoom,
            focal_mm=cam.focal_mm,
            zoom_affine=[[float(v) for v in row]
                         for row in zoom_transform(cam.zoom, out_size).m],
        )
        writer.append(rec, views={"top": frame})
    return writer.finalize()
