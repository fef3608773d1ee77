"""Object detection: a deterministic color-blob reference detector and a
client for an external HTTP detector service.

The reference detector labels 8-connected components of pixels matching a
per-channel color range.  It exists so the pipeline is fully testable with
synthetic scenes; a real detector can be dropped in through the remote mode
without touching the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import requests
from scipy import ndimage

from .frames import ImageFrame, encode_png
from .geometry import BoundingBox

MIN_COMPONENT_AREA = 9  # px; suppresses resampling speckle

_EIGHT_CONN = np.ones((3, 3), dtype=bool)


class DetectorTransportError(RuntimeError):
    """Remote detector unreachable or its response unusable."""


class DetectionValidationError(ValueError):
    """Remote detector returned values violating the detection contract."""


@dataclass(frozen=True)
class ColorRule:
    """Inclusive per-channel RGB range with the label it detects."""

    label: str
    lo: tuple[int, int, int]
    hi: tuple[int, int, int]


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    label: str
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DetectionValidationError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectorConfig:
    """Exactly one of reference-blob or remote mode."""

    mode: str = "reference_blob"
    rules: tuple[ColorRule, ...] = field(default_factory=tuple)
    endpoint: str | None = None
    timeout_ms: float = 1000.0

    def __post_init__(self):
        if self.mode not in ("reference_blob", "remote"):
            raise ValueError(f"unknown detector mode {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote mode requires an endpoint")
        if self.mode == "reference_blob" and self.endpoint:
            raise ValueError("reference mode must not carry an endpoint")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


def detect_blobs(frame: ImageFrame, cfg: DetectorConfig) -> list[Detection]:
    """Connected components of the color predicates, largest area first.

    Each component is reported as its tight pixel bounding box with
    score = component area / box pixel area.  Components under
    MIN_COMPONENT_AREA pixels are discarded.
    """
    if cfg.mode != "reference_blob":
        raise ValueError("detect_blobs requires reference_blob mode")
    px = frame.pixels
    found: list[tuple[int, Detection]] = []
    for rule in cfg.rules:
        mask = (px[:, :, 0] >= rule.lo[0]) & (px[:, :, 0] <= rule.hi[0])
        for c in (1, 2):
            mask &= px[:, :, c] >= rule.lo[c]
            mask &= px[:, :, c] <= rule.hi[c]
        labels, count = ndimage.label(mask, structure=_EIGHT_CONN)
        if not count:
            continue
        areas = np.bincount(labels.ravel())
        for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
            area = int(areas[idx])
            if area < MIN_COMPONENT_AREA:
                continue
            y0, y1 = sl[0].start, sl[0].stop - 1
            x0, x1 = sl[1].start, sl[1].stop - 1
            box_px = (x1 - x0 + 1) * (y1 - y0 + 1)
            det = Detection(
                box=BoundingBox(float(x0), float(y0), float(x1), float(y1)),
                label=rule.label,
                score=area / box_px,
            )
            found.append((area, det))
    found.sort(key=lambda t: (-t[0], t[1].box.x_min, t[1].box.y_min, t[1].label))
    return [det for _, det in found]


def select_target(dets: list[Detection], task_label: str = "") -> Detection | None:
    """Best detection for the task: score, then area, then leftmost."""
    pool = [d for d in dets if d.label == task_label] if task_label else list(dets)
    if not pool:
        return None
    pool.sort(key=lambda d: (-d.score, -d.box.area, d.box.x_min))
    return pool[0]


def remote_detect(frame: ImageFrame, cfg: DetectorConfig, task_label: str = "") -> list[Detection]:
    """POST the frame as PNG to the configured endpoint and parse detections.

    Transport failures and malformed responses raise DetectorTransportError;
    well-formed responses with out-of-contract values raise
    DetectionValidationError.
    """
    if cfg.mode != "remote":
        raise ValueError("remote_detect requires remote mode")
    try:
        resp = requests.post(
            cfg.endpoint,
            data=encode_png(frame),
            headers={"Content-Type": "image/png", "X-Task-Label": task_label},
            timeout=cfg.timeout_ms / 1000.0,
        )
        resp.raise_for_status()
        payload = resp.json()
    except requests.RequestException as exc:
        raise DetectorTransportError(f"remote detector failed: {exc}") from exc
    except ValueError as exc:
        raise DetectorTransportError(f"remote detector returned invalid JSON: {exc}") from exc

    if not isinstance(payload, dict) or not isinstance(payload.get("detections"), list):
        raise DetectorTransportError("remote detector response missing 'detections' list")

    out = []
    for i, item in enumerate(payload["detections"]):
        try:
            x0, y0, x1, y1 = (float(v) for v in item["box"])
            label = str(item["label"])
            score = float(item["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectorTransportError(f"malformed detection #{i}: {exc}") from exc
        try:
            box = BoundingBox(
                min(max(x0, 0.0), frame.width - 1.0),
                min(max(y0, 0.0), frame.height - 1.0),
                min(max(x1, 0.0), frame.width - 1.0),
                min(max(y1, 0.0), frame.height - 1.0),
            )
            out.append(Detection(box=box, label=label, score=score))
        except DetectionValidationError:
            raise
        except ValueError as exc:
            raise DetectionValidationError(f"invalid detection #{i}: {exc}") from exc
    return out
