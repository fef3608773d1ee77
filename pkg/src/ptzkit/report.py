"""Episode reporting: delimited stream dump plus rendered figures.

Writes, into the report directory:

    streams.csv           per-record camera streams (and applied scale when present)
    zoom_histogram.png    distribution of the zoom scalar over [1, 7]
    gimbal_coverage.png   visited pan/tilt commands over the reachable range
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .dataset import (
    PITCH_MAX,
    PITCH_MIN,
    YAW_MAX,
    YAW_MIN,
    ZOOM_MAX,
    ZOOM_MIN,
    EpisodeRecord,
    gimbal_coverage,
    read_episode,
    zoom_histogram,
)

CSV_FIELDS = ("t_ms", "gimbal_yaw", "gimbal_pitch", "zoom", "focal_mm",
              "left_grip", "right_grip", "proc_scale")


def write_streams_csv(records: list[EpisodeRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_FIELDS)
        for rec in records:
            writer.writerow([
                rec.t_ms, rec.gimbal_yaw, rec.gimbal_pitch, rec.zoom, rec.focal_mm,
                rec.left_grip, rec.right_grip,
                "" if rec.proc_scale is None else rec.proc_scale,
            ])


def plot_zoom_histogram(records: list[EpisodeRecord], path) -> None:
    hist = zoom_histogram(records)
    edges = np.asarray(hist["bin_edges"])
    counts = np.asarray(hist["counts"])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge",
           color="#4878cf", edgecolor="white")
    ax.set_xlim(ZOOM_MIN, ZOOM_MAX)
    ax.set_xlabel("zoom scale")
    ax.set_ylabel("frames")
    ax.set_title("Zoom usage")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_gimbal_coverage(records: list[EpisodeRecord], path) -> None:
    cov = gimbal_coverage(records)
    yaws = [r.gimbal_yaw for r in records]
    pitches = [r.gimbal_pitch for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(yaws, pitches, s=8, alpha=0.5, color="#d65f5f")
    ax.set_xlim(YAW_MIN, YAW_MAX)
    ax.set_ylim(PITCH_MIN, PITCH_MAX)
    ax.set_xlabel("yaw (deg)")
    ax.set_ylabel("pitch (deg)")
    ax.set_title(f"Gimbal coverage ({cov['coverage_fraction']:.1%} of reachable grid)")
    ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def episode_report(episode_dir, out_dir) -> dict:
    """Render the report for one episode; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, records, _ = read_episode(episode_dir)
    paths = {
        "streams_csv": out_dir / "streams.csv",
        "zoom_histogram": out_dir / "zoom_histogram.png",
        "gimbal_coverage": out_dir / "gimbal_coverage.png",
    }
    write_streams_csv(records, paths["streams_csv"])
    plot_zoom_histogram(records, paths["zoom_histogram"])
    plot_gimbal_coverage(records, paths["gimbal_coverage"])
    return {k: str(v) for k, v in paths.items()}
