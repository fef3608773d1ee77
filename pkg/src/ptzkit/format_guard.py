"""Output format verification mask and iterative correction.

A candidate frame conforms to a reference when three global predicates hold
(bit depth, color space, metadata) and, per pixel, every channel value is
representable at the reference bit depth.  Non-conforming pixels are pulled
back from the reference: I' = I (.) M + I_ref (.) (1 - M), iterated to a
fixed point (at most MAX_CORRECTION_ROUNDS rounds; one suffices while the
mask is held fixed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import FormatSpec, ImageFrame

MAX_CORRECTION_ROUNDS = 4

GLOBAL_PREDICATES = ("bit_depth", "color_space", "metadata")


@dataclass(frozen=True)
class GuardReport:
    ones_fraction: float
    failing_predicates: tuple[str, ...] = field(default_factory=tuple)
    corrected: bool = False

    def to_json(self) -> dict:
        return {
            "ones_fraction": self.ones_fraction,
            "failing_predicates": list(self.failing_predicates),
            "corrected": self.corrected,
        }


def _failing_globals(candidate: FormatSpec, reference: FormatSpec) -> tuple[str, ...]:
    fails = []
    if candidate.bit_depth != reference.bit_depth:
        fails.append("bit_depth")
    if candidate.color_space != reference.color_space:
        fails.append("color_space")
    if candidate.metadata != reference.metadata:
        fails.append("metadata")
    return tuple(fails)


def _representable(pixels: np.ndarray, reference: FormatSpec) -> np.ndarray:
    """Per-pixel mask: all channels within range and integral at the
    reference bit depth."""
    vals = pixels.astype(np.float64)
    ok = (vals >= 0.0) & (vals <= reference.max_value)
    if not np.issubdtype(pixels.dtype, np.integer):
        ok &= vals == np.rint(vals)
    return np.all(ok, axis=2)


def compute_format_mask(candidate: ImageFrame, reference: ImageFrame) -> np.ndarray:
    """{0,1} H x W mask of pixels conforming to the reference format."""
    if candidate.pixels.shape[:2] != reference.pixels.shape[:2]:
        raise ValueError(
            f"frame dims differ: {candidate.pixels.shape[:2]} vs {reference.pixels.shape[:2]}"
        )
    if _failing_globals(candidate.spec, reference.spec):
        return np.zeros(candidate.pixels.shape[:2], dtype=np.uint8)
    return _representable(candidate.pixels, reference.spec).astype(np.uint8)


def iterative_correct(candidate: ImageFrame, reference: ImageFrame, mask: np.ndarray) -> ImageFrame:
    """Keep candidate values where mask is 1, reference values elsewhere.

    The result is a fixed point: applying the update again with the same
    mask changes nothing.
    """
    if mask.shape != candidate.pixels.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match frame")
    m = mask.astype(bool)[..., None]
    ref_px = reference.pixels
    cand = np.rint(np.clip(candidate.pixels.astype(np.float64), 0, reference.spec.max_value))
    out = np.where(m, cand.astype(ref_px.dtype), ref_px)
    return ImageFrame(out, reference.spec)


def verify_frame(frame: ImageFrame, reference: ImageFrame) -> GuardReport:
    """Conformance report for a frame against its reference."""
    mask = compute_format_mask(frame, reference)
    return GuardReport(
        ones_fraction=float(mask.mean()),
        failing_predicates=_failing_globals(frame.spec, reference.spec),
    )


def verify_format(frame: ImageFrame, spec: FormatSpec) -> GuardReport:
    """Conformance against a bare format spec (no reference raster)."""
    fails = _failing_globals(frame.spec, spec)
    if fails:
        return GuardReport(0.0, fails)
    frac = float(_representable(frame.pixels, spec).mean())
    return GuardReport(frac, ())


def apply_guard(candidate: ImageFrame, reference: ImageFrame) -> tuple[ImageFrame, GuardReport]:
    """Run the verification/correction loop until the mask is all ones.

    Returns the conforming frame and a report carrying the pre-correction
    failures, the post-correction ones fraction, and whether any correction
    was applied.
    """
    pre_fails = _failing_globals(candidate.spec, reference.spec)
    frame = candidate
    corrected = False
    for _ in range(MAX_CORRECTION_ROUNDS):
        mask = compute_format_mask(frame, reference)
        if mask.all() and frame.conforming():
            break
        frame = iterative_correct(frame, reference, mask)
        corrected = True
    final_mask = compute_format_mask(frame, reference)
    return frame, GuardReport(
        ones_fraction=float(final_mask.mean()),
        failing_predicates=pre_fails,
        corrected=corrected,
    )
