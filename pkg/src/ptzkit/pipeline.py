"""Per-frame processing chain and whole-episode batch driver.

For each frame: detect on the raw image, compute the zoom scale for the
selected target, build the recenter+zoom transform, super-resolve the
source region the warp will read (ROI first, composite after), warp, and
finish with the format guard against the original frame.  Misses follow the
configured policy: pass the frame through untouched or re-apply the last
transform.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import detection as det
from .dataset import (
    EpisodeManifest,
    EpisodeRecord,
    EpisodeWriter,
    copy_frame_files,
    read_episode,
)
from .format_guard import GuardReport, apply_guard
from .frames import ImageFrame
from .geometry import Affine2D, BoundingBox, FrameSize, compose, recenter_transform, zoom_transform
from .superres import SRNetwork, sr_forward
from .warp import ZoomParams, bicubic_upscale, compute_scale_factor, crop_and_fill
from .warp import _bilinear_sample  # shared sampling core

SR_MODES = ("network", "bicubic", "none")
MISS_POLICIES = ("hold_last", "passthrough")
BICUBIC_MAX_FACTOR = 4


@dataclass
class PipelineConfig:
    zoom: ZoomParams = field(default_factory=ZoomParams)
    detector: det.DetectorConfig = field(default_factory=det.DetectorConfig)
    sr_mode: str = "bicubic"
    miss_policy: str = "passthrough"
    task_label: str = ""
    network: SRNetwork | None = None

    def __post_init__(self):
        if self.sr_mode not in SR_MODES:
            raise ValueError(f"sr_mode must be one of {SR_MODES}, got {self.sr_mode!r}")
        if self.miss_policy not in MISS_POLICIES:
            raise ValueError(
                f"miss_policy must be one of {MISS_POLICIES}, got {self.miss_policy!r}"
            )
        if self.sr_mode == "network" and self.network is None:
            from .superres import random_network

            self.network = random_network()


@dataclass
class FrameResult:
    frame: ImageFrame
    affine: Affine2D
    scale: float
    detection: det.Detection | None
    guard: GuardReport
    miss: bool
    error: str | None = None


@dataclass
class PipelineState:
    """Carries the previous transform for the hold_last miss policy."""

    last_affine: Affine2D | None = None
    last_scale: float = 1.0


def _sr_factor(cfg: PipelineConfig, s: float) -> int:
    if cfg.sr_mode == "none":
        return 1
    cap = cfg.network.r if cfg.sr_mode == "network" else BICUBIC_MAX_FACTOR
    return min(cap, max(1, math.ceil(s)))


def _warp_with_sr(frame: ImageFrame, t: Affine2D, f: FrameSize, u: int,
                  cfg: PipelineConfig) -> ImageFrame:
    """Warp through ``t`` sampling from the u-times super-resolved source
    region instead of the raw frame."""
    if u <= 1:
        return crop_and_fill(frame, t, f)

    inv = t.inverse()
    # Source support of the output rect (t is translation+isotropic scale,
    # so corners suffice).
    corners = [inv.apply(x, y) for x, y in ((0, 0), (f.w, 0), (0, f.h), (f.w, f.h))]
    xs = [c[0] for c in corners]
    ys = [c[1] for c in corners]
    x0 = max(0, math.floor(min(xs)) - 2)
    y0 = max(0, math.floor(min(ys)) - 2)
    x1 = min(frame.width, math.ceil(max(xs)) + 2)
    y1 = min(frame.height, math.ceil(max(ys)) + 2)
    if x1 - x0 < 2 or y1 - y0 < 2:
        return crop_and_fill(frame, t, f)

    roi = ImageFrame(frame.pixels[y0:y1, x0:x1], frame.spec)
    if cfg.sr_mode == "network":
        win = cfg.network.window
        if min(roi.height, roi.width) < win:
            enhanced = bicubic_upscale(roi, u)  # ROI too small for attention
        else:
            enhanced = sr_forward(roi, cfg.network)
            u = cfg.network.r
    else:
        enhanced = bicubic_upscale(roi, u)

    grid_y, grid_x = np.mgrid[0 : f.h, 0 : f.w].astype(np.float64)
    m = inv.m
    sx = m[0, 0] * grid_x + m[0, 1] * grid_y + m[0, 2]
    sy = m[1, 0] * grid_x + m[1, 1] * grid_y + m[1, 2]
    # Map source coords into the enhanced raster (center-aligned u-times grid).
    ex = (sx - x0) * u + (u - 1) / 2.0
    ey = (sy - y0) * u + (u - 1) / 2.0
    # Samples outside the original frame must stay fill-black, exactly as in
    # the plain warp; the enhanced raster is larger than the valid region.
    inside = (sx >= -0.5) & (sx <= frame.width - 0.5) & (sy >= -0.5) & (sy <= frame.height - 0.5)
    vals = _bilinear_sample(enhanced.pixels, ex, ey)
    vals *= inside[..., None]
    info = np.iinfo(frame.pixels.dtype)
    out = np.rint(np.clip(vals, info.min, info.max)).astype(frame.pixels.dtype)
    return ImageFrame(out, frame.spec)


def process_frame(frame: ImageFrame, state: PipelineState, cfg: PipelineConfig) -> FrameResult:
    """Run one frame through detect -> recenter -> zoom -> SR -> guard."""
    f = FrameSize(frame.width, frame.height)
    target = None
    error = None
    try:
        if cfg.detector.mode == "reference_blob":
            dets = det.detect_blobs(frame, cfg.detector)
        else:
            dets = det.remote_detect(frame, cfg.detector, cfg.task_label)
        target = det.select_target(dets, cfg.task_label)
    except (det.DetectorTransportError, det.DetectionValidationError) as exc:
        error = str(exc)

    if target is None:
        if cfg.miss_policy == "hold_last" and state.last_affine is not None:
            t = state.last_affine
            s = state.last_scale
            u = _sr_factor(cfg, s)
            out = _warp_with_sr(frame, t, f, u, cfg)
            guarded, report = apply_guard(out, frame)
            return FrameResult(guarded, t, s, None, report, miss=True, error=error)
        report = GuardReport(ones_fraction=1.0, corrected=False)
        return FrameResult(frame.copy(), Affine2D.identity(), 1.0, None, report,
                           miss=True, error=error)

    s, degenerate = compute_scale_factor(target.box, f, cfg.zoom)
    t = compose(zoom_transform(s, f), recenter_transform(target.box, f))
    u = _sr_factor(cfg, s)
    out = _warp_with_sr(frame, t, f, u, cfg)
    guarded, report = apply_guard(out, frame)
    state.last_affine = t
    state.last_scale = s
    return FrameResult(guarded, t, s, target, report, miss=False, error=error)


def process_episode(episode_dir, out_dir, cfg: PipelineConfig,
                    audit_centering: bool = False) -> dict:
    """Process every frame of an episode into a new episode directory.

    Non-image streams are copied bit-exactly; the top-view frames are
    replaced by processed frames and each record gains the applied scale and
    affine.  Returns the run summary (also written as summary.json).
    """
    t_start = time.monotonic()
    episode_dir = Path(episode_dir)
    out_dir = Path(out_dir)
    manifest, records, loader = read_episode(episode_dir)
    w, h = manifest.frame_size
    out_manifest = EpisodeManifest(
        name=manifest.name,
        frame_rate_hz=manifest.frame_rate_hz,
        frame_size=manifest.frame_size,
        layout=manifest.layout,
        arms_present=manifest.arms_present,
        bit_depth=manifest.bit_depth,
        color_space=manifest.color_space,
    )
    writer = EpisodeWriter(out_dir, out_manifest)
    state = PipelineState()
    hits = 0
    misses = 0
    scales = []
    guard_all_ones = 0
    guard_corrected = 0
    centered = 0
    audited = 0

    for rec in records:
        frame = loader.load(rec, "top")
        result = process_frame(frame, state, cfg)
        if result.miss:
            misses += 1
        else:
            hits += 1
        scales.append(result.scale)
        if result.guard.ones_fraction == 1.0:
            guard_all_ones += 1
        if result.guard.corrected:
            guard_corrected += 1

        out_rec = EpisodeRecord.from_json(rec.to_json())
        out_rec.frames = dict(rec.frames)
        out_rec.proc_scale = result.scale
        out_rec.proc_affine = [[float(v) for v in row] for row in result.affine.m[:2]] + [[0.0, 0.0, 1.0]]

        untouched = result.miss and np.array_equal(result.affine.m, np.eye(3))
        if untouched:
            # Bit-identical pass-through: copy the stored file verbatim.
            writer.append(out_rec, views=None)
            copy_frame_files(episode_dir, out_dir, rec, ["top"])
        else:
            writer.append(out_rec, views={"top": result.frame})
        copy_frame_files(episode_dir, out_dir, rec, [v for v in ("left", "front") if v in rec.frames])

        if audit_centering and not result.miss:
            dets = det.detect_blobs(result.frame, cfg.detector)
            tgt = det.select_target(dets, cfg.task_label)
            audited += 1
            if tgt is not None:
                cx = (tgt.box.x_min + tgt.box.x_max) / 2.0
                cy = (tgt.box.y_min + tgt.box.y_max) / 2.0
                if abs(cx - w / 2.0) <= 2.0 and abs(cy - h / 2.0) <= 2.0:
                    centered += 1

    writer.finalize()
    summary = {
        "frames": len(records),
        "hits": hits,
        "misses": misses,
        "mean_scale": float(np.mean(scales)) if scales else 1.0,
        "guard_all_ones": guard_all_ones,
        "guard_corrected": guard_corrected,
        "runtime_s": time.monotonic() - t_start,
    }
    if audit_centering:
        summary["centered_2px_fraction"] = (centered / audited) if audited else 0.0
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
