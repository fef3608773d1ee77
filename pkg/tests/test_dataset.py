import dataclasses
import json

import numpy as np
import pytest

from ptzkit.dataset import (
    AggregationError,
    EpisodeManifest,
    EpisodeRecord,
    EpisodeValidationError,
    aggregate,
    read_episode,
    write_episode,
    zoom_histogram,
)
from ptzkit.frames import ImageFrame


def _records(rng, n, zoom=None):
    out = []
    for i in range(n):
        out.append(EpisodeRecord(
            t_ms=i * 33,
            left_joints=list(rng.uniform(-3.14, 3.14, 6)),
            right_joints=list(rng.uniform(-3.14, 3.14, 6)),
            left_grip=float(rng.uniform(0, 1)),
            right_grip=float(rng.uniform(0, 1)),
            gimbal_pitch=float(rng.uniform(0, 60)),
            gimbal_yaw=float(rng.uniform(-90, 90)),
            zoom=zoom if zoom is not None else float(rng.uniform(1, 7)),
            focal_mm=float(rng.uniform(4.8, 48.2)),
        ))
    return out


def _frames(rng, n, w=16, h=12):
    return [
        {"top": ImageFrame(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))}
        for _ in range(n)
    ]


def test_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    records = _records(rng, 10)
    frames = _frames(rng, 10)
    manifest = EpisodeManifest(name="ep", frame_size=(16, 12))
    write_episode(records, frames, tmp_path / "ep", manifest)
    got_manifest, got_records, loader = read_episode(tmp_path / "ep")
    assert got_manifest.records == 10
    assert len(got_records) == 10
    for a, b in zip(records, got_records):
        assert dataclasses.asdict(a) == dataclasses.asdict(b)
    # frames round-trip pixel exact
    px = loader.load(got_records[3], "top").pixels
    assert np.array_equal(px, frames[3]["top"].pixels)


def test_nine_digit_normalization_makes_roundtrip_exact(tmp_path):
    rec = EpisodeRecord(t_ms=0, gimbal_yaw=12.3456789123456789)
    assert rec.gimbal_yaw == float(f"{12.3456789123456789:.9g}")
    write_episode([rec], None, tmp_path / "ep")
    _, got, _ = read_episode(tmp_path / "ep")
    assert got[0].gimbal_yaw == rec.gimbal_yaw


def test_validation_zoom_out_of_range(tmp_path):
    rng = np.random.default_rng(1)
    records = _records(rng, 5)
    records[3] = dataclasses.replace(records[3], zoom=7.5)
    with pytest.raises(EpisodeValidationError) as err:
        write_episode(records, None, tmp_path / "ep")
    assert err.value.index == 3
    assert err.value.field == "zoom"


def test_validation_on_read(tmp_path):
    rng = np.random.default_rng(2)
    write_episode(_records(rng, 4), None, tmp_path / "ep")
    streams = tmp_path / "ep" / "streams.jsonl"
    lines = streams.read_text().splitlines()
    rec = json.loads(lines[2])
    rec["gimbal_pitch"] = 75.0
    lines[2] = json.dumps(rec)
    streams.write_text("\n".join(lines) + "\n")
    with pytest.raises(EpisodeValidationError) as err:
        read_episode(tmp_path / "ep")
    assert err.value.index == 2
    assert err.value.field == "gimbal_pitch"


def test_non_monotone_timestamps_rejected(tmp_path):
    recs = [EpisodeRecord(t_ms=10), EpisodeRecord(t_ms=10)]
    with pytest.raises(EpisodeValidationError) as err:
        write_episode(recs, None, tmp_path / "ep")
    assert err.value.field == "t_ms"


def test_missing_episode(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_episode(tmp_path / "nothing")
    (tmp_path / "empty").mkdir()
    with pytest.raises(FileNotFoundError):
        read_episode(tmp_path / "empty")


def test_empty_episode_valid(tmp_path):
    manifest = write_episode([], None, tmp_path / "ep")
    assert manifest.records == 0
    got_manifest, got_records, _ = read_episode(tmp_path / "ep")
    assert got_records == []


def test_depth_roundtrip(tmp_path):
    from ptzkit.dataset import EpisodeWriter
    from ptzkit.frames import read_depth_png

    rng = np.random.default_rng(3)
    writer = EpisodeWriter(tmp_path / "ep", EpisodeManifest(name="ep", frame_size=(8, 6)))
    depth = rng.integers(0, 65536, (6, 8), dtype=np.uint16)
    rec = writer.append(EpisodeRecord(t_ms=0),
                        views={"top": ImageFrame(rng.integers(0, 256, (6, 8, 3), dtype=np.uint8))},
                        depth=depth)
    writer.finalize()
    assert rec.depth is not None
    got = read_depth_png(tmp_path / "ep" / "depth" / rec.depth)
    assert np.array_equal(got, depth)


def test_aggregate_two_episodes(tmp_path):
    rng = np.random.default_rng(4)
    for name in ("a", "b"):
        write_episode(_records(rng, 6), None, tmp_path / name,
                      EpisodeManifest(name=name, frame_size=(32, 18)))
    index = aggregate([tmp_path / "a", tmp_path / "b"], tmp_path / "agg")
    assert len(index["episodes"]) == 2
    assert index["stats"]["records"] == 12
    assert (tmp_path / "agg" / "index.json").exists()
    cov = index["stats"]["gimbal_coverage"]
    assert 0.0 < cov["coverage_fraction"] <= 1.0


def test_aggregate_size_mismatch(tmp_path):
    rng = np.random.default_rng(5)
    write_episode(_records(rng, 2), None, tmp_path / "a",
                  EpisodeManifest(name="a", frame_size=(32, 18)))
    write_episode(_records(rng, 2), None, tmp_path / "b",
                  EpisodeManifest(name="b", frame_size=(64, 36)))
    with pytest.raises(AggregationError) as err:
        aggregate([tmp_path / "a", tmp_path / "b"], tmp_path / "agg")
    assert "a" in str(err.value) and "b" in str(err.value)


def test_zoom_histogram_single_bin():
    rng = np.random.default_rng(6)
    records = _records(rng, 9, zoom=1.0)
    hist = zoom_histogram(records)
    counts = hist["counts"]
    assert counts[0] == 9
    assert sum(counts) == 9


def test_manifest_schema_enforced(tmp_path):
    rng = np.random.default_rng(7)
    write_episode(_records(rng, 2), None, tmp_path / "ep")
    manifest_path = tmp_path / "ep" / "manifest.json"
    data = json.loads(manifest_path.read_text())
    data["schema"] = "avr-episode/999"
    manifest_path.write_text(json.dumps(data))
    with pytest.raises(ValueError):
        read_episode(tmp_path / "ep")


def test_manifest_record_count_checked(tmp_path):
    rng = np.random.default_rng(8)
    write_episode(_records(rng, 3), None, tmp_path / "ep")
    manifest_path = tmp_path / "ep" / "manifest.json"
    data = json.loads(manifest_path.read_text())
    data["records"] = 5
    manifest_path.write_text(json.dumps(data))
    with pytest.raises(ValueError):
        read_episode(tmp_path / "ep")
