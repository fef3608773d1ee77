"""Episode storage for the four recorded sensory streams.

Layout of an episode directory:

    manifest.json            metadata incl. schema version "avr-episode/1"
    streams.jsonl            one record per line, all non-image streams
    frames/{view}_{seq:06}.png
    depth/depth_{seq:06}.png (optional, 16-bit)

Float fields are normalized to 9 significant decimal digits at record
construction, so write -> read round trips are exact for every field.
"""

from __future__ import annotations

import json
import math
import os
import shutil
from dataclasses import dataclass, field, fields, asdict
from pathlib import Path

import numpy as np

from .frames import FormatSpec, ImageFrame, read_png, write_png

SCHEMA_VERSION = "avr-episode/1"
VIEWS = ("top", "left", "front")

ZOOM_MIN, ZOOM_MAX = 1.0, 7.0
PITCH_MIN, PITCH_MAX = 0.0, 60.0
YAW_MIN, YAW_MAX = -90.0, 90.0


class EpisodeValidationError(ValueError):
    def __init__(self, index: int, field_name: str, message: str):
        super().__init__(f"record {index}, field {field_name!r}: {message}")
        self.index = index
        self.field = field_name


class AggregationError(ValueError):
    pass


def _dec9(v: float) -> float:
    return float(f"{float(v):.9g}")


@dataclass
class EpisodeRecord:
    """One time step across all streams."""

    t_ms: int
    left_joints: list[float] = field(default_factory=lambda: [0.0] * 6)
    right_joints: list[float] = field(default_factory=lambda: [0.0] * 6)
    left_grip: float = 0.0
    right_grip: float = 0.0
    gimbal_pitch: float = 0.0
    gimbal_yaw: float = 0.0
    zoom: float = 1.0
    focal_mm: float = 4.8
    zoom_affine: list[list[float]] | None = None
    frames: dict[str, str] = field(default_factory=dict)
    depth: str | None = None
    proc_scale: float | None = None
    proc_affine: list[list[float]] | None = None

    def __post_init__(self):
        self.t_ms = int(self.t_ms)
        self.left_joints = [_dec9(v) for v in self.left_joints]
        self.right_joints = [_dec9(v) for v in self.right_joints]
        self.left_grip = _dec9(self.left_grip)
        self.right_grip = _dec9(self.right_grip)
        self.gimbal_pitch = _dec9(self.gimbal_pitch)
        self.gimbal_yaw = _dec9(self.gimbal_yaw)
        self.zoom = _dec9(self.zoom)
        self.focal_mm = _dec9(self.focal_mm)
        if self.zoom_affine is not None:
            self.zoom_affine = [[_dec9(v) for v in row] for row in self.zoom_affine]
        if self.proc_scale is not None:
            self.proc_scale = _dec9(self.proc_scale)
        if self.proc_affine is not None:
            self.proc_affine = [[_dec9(v) for v in row] for row in self.proc_affine]

    def validate(self, index: int) -> None:
        def check(cond: bool, field_name: str, msg: str):
            if not cond:
                raise EpisodeValidationError(index, field_name, msg)

        check(len(self.left_joints) == 6, "left_joints", "must have 6 entries")
        check(len(self.right_joints) == 6, "right_joints", "must have 6 entries")
        for name in ("left_grip", "right_grip"):
            v = getattr(self, name)
            check(0.0 <= v <= 1.0, name, f"{v} outside [0, 1]")
        check(
            PITCH_MIN <= self.gimbal_pitch <= PITCH_MAX,
            "gimbal_pitch",
            f"{self.gimbal_pitch} outside [{PITCH_MIN}, {PITCH_MAX}]",
        )
        check(
            YAW_MIN <= self.gimbal_yaw <= YAW_MAX,
            "gimbal_yaw",
            f"{self.gimbal_yaw} outside [{YAW_MIN}, {YAW_MAX}]",
        )
        check(
            ZOOM_MIN <= self.zoom <= ZOOM_MAX,
            "zoom",
            f"{self.zoom} outside [{ZOOM_MIN}, {ZOOM_MAX}]",
        )
        all_floats = (
            self.left_joints + self.right_joints
            + [self.left_grip, self.right_grip, self.gimbal_pitch, self.gimbal_yaw,
               self.zoom, self.focal_mm]
        )
        check(all(math.isfinite(v) for v in all_floats), "t_ms", "non-finite value")
        for view in self.frames:
            check(view in VIEWS, "frames", f"unknown view {view!r}")

    def to_json(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}

    @staticmethod
    def from_json(d: dict) -> "EpisodeRecord":
        known = {f.name for f in fields(EpisodeRecord)}
        return EpisodeRecord(**{k: v for k, v in d.items() if k in known})


@dataclass
class EpisodeManifest:
    name: str
    frame_rate_hz: float = 30.0
    frame_size: tuple[int, int] = (640, 360)
    layout: tuple[str, ...] = ("top",)
    records: int = 0
    schema: str = SCHEMA_VERSION
    arms_present: bool = False
    bit_depth: int = 8
    color_space: str = "srgb"

    def __post_init__(self):
        self.frame_size = tuple(int(v) for v in self.frame_size)
        self.layout = tuple(self.layout)
        if not set(self.layout) <= set(VIEWS):
            raise ValueError(f"layout {self.layout} not within {VIEWS}")

    def format_spec(self) -> FormatSpec:
        return FormatSpec(bit_depth=self.bit_depth, color_space=self.color_space)

    def to_json(self) -> dict:
        return {
            "schema": self.schema,
            "name": self.name,
            "frame_rate_hz": self.frame_rate_hz,
            "frame_size": list(self.frame_size),
            "layout": list(self.layout),
            "records": self.records,
            "arms_present": self.arms_present,
            "bit_depth": self.bit_depth,
            "color_space": self.color_space,
        }

    @staticmethod
    def from_json(d: dict) -> "EpisodeManifest":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported episode schema {d.get('schema')!r}")
        return EpisodeManifest(
            name=d["name"],
            frame_rate_hz=d.get("frame_rate_hz", 30.0),
            frame_size=tuple(d["frame_size"]),
            layout=tuple(d.get("layout", ("top",))),
            records=d.get("records", 0),
            arms_present=d.get("arms_present", False),
            bit_depth=d.get("bit_depth", 8),
            color_space=d.get("color_space", "srgb"),
        )


def frame_filename(view: str, seq: int) -> str:
    return f"{view}_{seq:06d}.png"


class EpisodeWriter:
    """Appends records and frames; finalize() writes the manifest.

    One writer at a time per directory; readers are safe concurrently.
    """

    def __init__(self, directory, manifest: EpisodeManifest):
        self.dir = Path(directory)
        self.manifest = manifest
        self.records: list[EpisodeRecord] = []
        self._last_t: int | None = None
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "frames").mkdir(exist_ok=True)

    def append(self, record: EpisodeRecord, views: dict[str, ImageFrame | bytes] | None = None,
               depth: np.ndarray | None = None) -> EpisodeRecord:
        index = len(self.records)
        if self._last_t is not None and record.t_ms <= self._last_t:
            raise EpisodeValidationError(index, "t_ms", "timestamps must strictly increase")
        record.validate(index)
        seq = index
        if views:
            for view, frame in views.items():
                name = frame_filename(view, seq)
                if isinstance(frame, bytes):  # pre-encoded PNG
                    (self.dir / "frames" / name).write_bytes(frame)
                else:
                    write_png(self.dir / "frames" / name, frame)
                record.frames[view] = name
        if depth is not None:
            from .frames import write_depth_png

            (self.dir / "depth").mkdir(exist_ok=True)
            name = f"depth_{seq:06d}.png"
            write_depth_png(self.dir / "depth" / name, depth)
            record.depth = name
        self.records.append(record)
        self._last_t = record.t_ms
        return record

    def finalize(self) -> EpisodeManifest:
        self.manifest.records = len(self.records)
        with open(self.dir / "streams.jsonl", "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec.to_json(), sort_keys=True))
                fh.write("\n")
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(self.manifest.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return self.manifest


def write_episode(records: list[EpisodeRecord], frames: list[dict[str, ImageFrame]] | None,
                  directory, manifest: EpisodeManifest | None = None) -> EpisodeManifest:
    manifest = manifest or EpisodeManifest(name=Path(directory).name)
    writer = EpisodeWriter(directory, manifest)
    for i, rec in enumerate(records):
        writer.append(rec, frames[i] if frames else None)
    return writer.finalize()


class FrameLoader:
    """Lazy per-record frame access for a read episode."""

    def __init__(self, directory: Path, spec: FormatSpec):
        self.dir = Path(directory)
        self.spec = spec

    def load(self, record: EpisodeRecord, view: str = "top") -> ImageFrame:
        if view not in record.frames:
            raise FileNotFoundError(f"record has no {view!r} frame")
        return read_png(self.dir / "frames" / record.frames[view], self.spec)

    def frame_path(self, record: EpisodeRecord, view: str) -> Path:
        return self.dir / "frames" / record.frames[view]


def read_episode(directory) -> tuple[EpisodeManifest, list[EpisodeRecord], FrameLoader]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no episode manifest in {directory}")
    with open(manifest_path) as fh:
        manifest = EpisodeManifest.from_json(json.load(fh))
    records: list[EpisodeRecord] = []
    streams = directory / "streams.jsonl"
    if streams.exists():
        with open(streams) as fh:
            for i, line in enumerate(fh):
                if line.strip():
                    records.append(EpisodeRecord.from_json(json.loads(line)))
    if manifest.records != len(records):
        raise ValueError(
            f"manifest declares {manifest.records} records, found {len(records)}"
        )
    last_t = None
    for i, rec in enumerate(records):
        rec.validate(i)
        if last_t is not None and rec.t_ms <= last_t:
            raise EpisodeValidationError(i, "t_ms", "timestamps must strictly increase")
        last_t = rec.t_ms
    return manifest, records, FrameLoader(directory, manifest.format_spec())


def zoom_histogram(records: list[EpisodeRecord], bins: int = 12) -> dict:
    zooms = [r.zoom for r in records]
    counts, edges = np.histogram(zooms, bins=bins, range=(ZOOM_MIN, ZOOM_MAX))
    return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def gimbal_coverage(records: list[EpisodeRecord], cell_deg: float = 5.0) -> dict:
    """Range and fraction of the reachable pitch/yaw grid that was visited."""
    if not records:
        return {"pitch_range": None, "yaw_range": None, "coverage_fraction": 0.0}
    pitches = np.array([r.gimbal_pitch for r in records])
    yaws = np.array([r.gimbal_yaw for r in records])
    n_p = int(np.ceil((PITCH_MAX - PITCH_MIN) / cell_deg))
    n_y = int(np.ceil((YAW_MAX - YAW_MIN) / cell_deg))
    pi = np.clip(((pitches - PITCH_MIN) / cell_deg).astype(int), 0, n_p - 1)
    yi = np.clip(((yaws - YAW_MIN) / cell_deg).astype(int), 0, n_y - 1)
    visited = len(set(zip(pi.tolist(), yi.tolist())))
    return {
        "pitch_range": [float(pitches.min()), float(pitches.max())],
        "yaw_range": [float(yaws.min()), float(yaws.max())],
        "coverage_fraction": visited / (n_p * n_y),
    }


def aggregate(episode_dirs: list, out_dir) -> dict:
    """Combine episodes into an index with global statistics.

    All episodes must share schema version and frame size.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    all_records: list[EpisodeRecord] = []
    sizes: dict[tuple[int, int], list[str]] = {}
    for d in episode_dirs:
        manifest, records, _ = read_episode(d)
        entries.append({"dir": str(d), "manifest": manifest.to_json()})
        sizes.setdefault(manifest.frame_size, []).append(str(d))
        all_records.extend(records)
    if len(sizes) > 1:
        listing = "; ".join(f"{k}: {v}" for k, v in sorted(sizes.items()))
        raise AggregationError(f"frame sizes differ across episodes: {listing}")
    index = {
        "schema": SCHEMA_VERSION,
        "episodes": entries,
        "stats": {
            "records": len(all_records),
            "zoom_histogram": zoom_histogram(all_records),
            "gimbal_coverage": gimbal_coverage(all_records),
        },
    }
    with open(out_dir / "index.json", "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return index


def copy_frame_files(src_dir: Path, dst_dir: Path, record: EpisodeRecord,
                     views: list[str]) -> None:
    """Copy view frame files verbatim (used for pass-through views)."""
    (dst_dir / "frames").mkdir(parents=True, exist_ok=True)
    for view in views:
        if view in record.frames:
            shutil.copyfile(
                src_dir / "frames" / record.frames[view],
                dst_dir / "frames" / record.frames[view],
            )
