"""Deterministic stand-in for the physical PTZ camera.

A flat world raster holds colored disc targets on a textured neutral
background.  The camera view is a crop of that raster: pan/yaw and
tilt/pitch move the crop center linearly over the pannable extent
(pan 0, tilt 30 looks at the world center) and zoom shrinks the crop side
by 1/z.  The crop is resampled to the output size with the same bilinear
warp the pipeline uses, so rendering is pure and reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detection import ColorRule
from .frames import FormatSpec, ImageFrame, read_png, write_png
from .geometry import Affine2D, FrameSize
from .gimbal import CameraState, PAN_MAX, TILT_MAX, TILT_MIN
from .warp import crop_and_fill

TILT_CENTER = (TILT_MIN + TILT_MAX) / 2.0

# Saturated target palette with detector rules that never match the neutral
# background (grays have near-equal channels; every rule requires channel
# separation).
PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (230, 30, 30),
    "green": (30, 200, 40),
    "blue": (40, 60, 230),
    "yellow": (230, 210, 30),
    "magenta": (220, 40, 210),
    "cyan": (30, 200, 210),
}

DETECTOR_RULES: tuple[ColorRule, ...] = (
    ColorRule("red", (150, 0, 0), (255, 120, 120)),
    ColorRule("green", (0, 130, 0), (120, 255, 130)),
    ColorRule("blue", (0, 0, 150), (130, 140, 255)),
    ColorRule("yellow", (150, 140, 0), (255, 255, 120)),
    ColorRule("magenta", (140, 0, 130), (255, 130, 255)),
    ColorRule("cyan", (0, 130, 130), (120, 255, 255)),
)


@dataclass(frozen=True)
class Target:
    id: int
    color: str
    cx: float
    cy: float
    radius: float


@dataclass
class WorldScene:
    raster: np.ndarray  # (side, side, 3) uint8
    targets: list[Target]
    base_fov_px: float  # crop width at zoom 1
    seed: int

    @property
    def side(self) -> int:
        return self.raster.shape[0]

    def pan_extent_x(self) -> float:
        return (self.side - self.base_fov_px) / 2.0

    def pan_extent_y(self, aspect: float) -> float:
        return (self.side - self.base_fov_px * aspect) / 2.0


def make_scene(seed: int = 0, n_targets: int = 1, side: int = 2048,
               base_fov_px: float = 512.0) -> WorldScene:
    """Seeded scene: textured gray background plus non-overlapping discs."""
    if n_targets < 0:
        raise ValueError("n_targets must be >= 0")
    if n_targets > len(PALETTE):
        raise ValueError(f"at most {len(PALETTE)} targets supported")
    rng = np.random.default_rng(seed)
    gray = rng.integers(104, 153, size=(side, side), dtype=np.uint8)
    raster = np.stack([gray, gray, gray], axis=2)

    names = list(PALETTE)
    targets: list[Target] = []
    # Keep targets inside the region reachable by the view center so any
    # target can be aimed at directly.
    margin = base_fov_px / 2.0 + 64.0
    for i in range(n_targets):
        radius = float(rng.uniform(24.0, 48.0))
        for _ in range(1000):
            cx = float(rng.uniform(margin, side - margin))
            cy = float(rng.uniform(margin, side - margin))
            if all(
                (cx - t.cx) ** 2 + (cy - t.cy) ** 2 >= (radius + t.radius + 16.0) ** 2
                for t in targets
            ):
                break
        else:
            raise RuntimeError("could not place non-overlapping targets")
        targets.append(Target(id=i, color=names[i], cx=cx, cy=cy, radius=radius))

    yy, xx = np.mgrid[0:side, 0:side]
    for t in targets:
        mask = (xx - t.cx) ** 2 + (yy - t.cy) ** 2 <= t.radius**2
        raster[mask] = PALETTE[t.color]
    return WorldScene(raster=raster, targets=targets, base_fov_px=base_fov_px, seed=seed)


def _view_transform(scene: WorldScene, s: CameraState, out_size: FrameSize) -> Affine2D:
    """World -> frame affine for the given camera state."""
    aspect = out_size.h / out_size.w
    cx = scene.side / 2.0 + (s.pan / PAN_MAX) * scene.pan_extent_x()
    cy = scene.side / 2.0 + ((s.tilt - TILT_CENTER) / (TILT_MAX - TILT_CENTER)) * scene.pan_extent_y(aspect)
    crop_w = scene.base_fov_px / s.zoom
    k = out_size.w / crop_w
    return Affine2D(
        np.array(
            [
                [k, 0.0, out_size.w / 2.0 - k * cx],
                [0.0, k, out_size.h / 2.0 - k * cy],
                [0.0, 0.0, 1.0],
            ]
        )
    )


def render_frame(scene: WorldScene, s: CameraState, out_size: FrameSize,
                 spec: FormatSpec | None = None) -> ImageFrame:
    """Render the camera view; deterministic for a given scene and state."""
    world = ImageFrame(scene.raster, spec or FormatSpec())
    return crop_and_fill(world, _view_transform(scene, s, out_size), out_size)


def target_frame_position(scene: WorldScene, s: CameraState, target_id: int,
                          out_size: FrameSize) -> tuple[float, float] | None:
    """Analytic frame position of a target center; None if outside the crop."""
    matches = [t for t in scene.targets if t.id == target_id]
    if not matches:
        raise KeyError(f"no target with id {target_id}")
    t = matches[0]
    x, y = _view_transform(scene, s, out_size).apply(t.cx, t.cy)
    if 0.0 <= x < out_size.w and 0.0 <= y < out_size.h:
        return x, y
    return None


def aim_angles(scene: WorldScene, target_id: int,
               out_size: FrameSize | None = None) -> tuple[float, float]:
    """Pan/tilt at which the view center coincides with the target center."""
    matches = [t for t in scene.targets if t.id == target_id]
    if not matches:
        raise KeyError(f"no target with id {target_id}")
    t = matches[0]
    aspect = out_size.h / out_size.w if out_size else 9.0 / 16.0
    pan = (t.cx - scene.side / 2.0) / scene.pan_extent_x() * PAN_MAX
    tilt = TILT_CENTER + (t.cy - scene.side / 2.0) / scene.pan_extent_y(aspect) * (TILT_MAX - TILT_CENTER)
    return pan, tilt


def scene_info(scene: WorldScene) -> dict:
    """JSON-friendly scene description (targets, palette, aim angles)."""
    return {
        "seed": scene.seed,
        "side": scene.side,
        "base_fov_px": scene.base_fov_px,
        "targets": [
            {
                "id": t.id,
                "color": t.color,
                "center": [t.cx, t.cy],
                "radius": t.radius,
                "aim": list(aim_angles(scene, t.id)),
            }
            for t in scene.targets
        ],
    }


def save_scene(scene: WorldScene, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_png(directory / "world.png", ImageFrame(scene.raster))
    with open(directory / "scene.json", "w") as fh:
        json.dump(scene_info(scene), fh, indent=2)
        fh.write("\n")


def load_scene(directory) -> WorldScene:
    directory = Path(directory)
    raster = read_png(directory / "world.png").pixels
    with open(directory / "scene.json") as fh:
        info = json.load(fh)
    targets = [
        Target(id=t["id"], color=t["color"], cx=t["center"][0], cy=t["center"][1],
               radius=t["radius"])
        for t in info["targets"]
    ]
    return WorldScene(raster=raster, targets=targets,
                      base_fov_px=info["base_fov_px"], seed=info["seed"])
