"""Zoom scale computation and deterministic resampling.

The warp convention matches the transform convention in :mod:`ptzkit.geometry`:
a transform ``t`` maps source coordinates to output coordinates, so the output
pixel at ``p`` is sampled from the source at ``t.inverse()(p)``.  Samples that
fall outside the source raster are filled with black.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .frames import ImageFrame
from .geometry import Affine2D, BoundingBox, FrameSize


@dataclass(frozen=True)
class ZoomParams:
    """Dynamic-zoom limits: maximum scale and ROI safety padding."""

    s_max: float = 7.0
    alpha: float = 1.2

    def __post_init__(self):
        if self.s_max < 1.0:
            raise ValueError(f"s_max must be >= 1, got {self.s_max}")
        if self.alpha < 1.0:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")


class ScaleFactor(NamedTuple):
    s: float
    degenerate: bool


def compute_scale_factor(target: BoundingBox, f: FrameSize, zp: ZoomParams) -> ScaleFactor:
    """Scale filling the frame with the alpha-padded target box.

    s = clamp(min(W / (alpha*w), H / (alpha*h)), 1, s_max).  A zero-area box
    cannot define a scale; it yields s = 1 with the degenerate flag set.
    """
    w, h = target.width, target.height
    if w <= 0.0 or h <= 0.0:
        return ScaleFactor(1.0, True)
    s = min(f.w / (zp.alpha * w), f.h / (zp.alpha * h))
    return ScaleFactor(min(max(s, 1.0), zp.s_max), False)


try:
    from numba import njit as _njit
except ImportError:  # pure-numpy fallback keeps results identical, just slower
    _njit = None


def _bilinear_numpy(flat: np.ndarray, src_h: int, src_w: int,
                    sx: np.ndarray, sy: np.ndarray, out: np.ndarray) -> None:
    x0f = np.floor(sx)
    y0f = np.floor(sy)
    fx = sx - x0f
    fy = sy - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    x1 = x0 + 1
    y1 = y0 + 1
    # validity is separable per axis; fold it into the tap weights
    wx0 = (1.0 - fx) * ((x0 >= 0) & (x0 < src_w))
    wx1 = fx * ((x1 >= 0) & (x1 < src_w))
    wy0 = (1.0 - fy) * ((y0 >= 0) & (y0 < src_h))
    wy1 = fy * ((y1 >= 0) & (y1 < src_h))
    x0c = np.clip(x0, 0, src_w - 1)
    x1c = np.clip(x1, 0, src_w - 1)
    y0row = np.clip(y0, 0, src_h - 1) * src_w
    y1row = np.clip(y1, 0, src_h - 1) * src_w
    channels = out.shape[2]
    for idx, wgt in (
        (y0row + x0c, wy0 * wx0),
        (y0row + x1c, wy0 * wx1),
        (y1row + x0c, wy1 * wx0),
        (y1row + x1c, wy1 * wx1),
    ):
        vals = flat[idx.ravel()].reshape(idx.shape + (channels,))
        out += wgt[..., None] * vals


def _bilinear_loop(flat, src_h, src_w, sx, sy, out):
    # same tap order and float64 arithmetic as _bilinear_numpy, so both
    # kernels produce bit-identical results
    height, width = sx.shape
    channels = out.shape[2]
    for i in range(height):
        for j in range(width):
            xs = sx[i, j]
            ys = sy[i, j]
            x0f = math.floor(xs)
            y0f = math.floor(ys)
            fx = xs - x0f
            fy = ys - y0f
            x0 = int(x0f)
            y0 = int(y0f)
            x1 = x0 + 1
            y1 = y0 + 1
            wx0 = (1.0 - fx) * (1.0 if 0 <= x0 < src_w else 0.0)
            wx1 = fx * (1.0 if 0 <= x1 < src_w else 0.0)
            wy0 = (1.0 - fy) * (1.0 if 0 <= y0 < src_h else 0.0)
            wy1 = fy * (1.0 if 0 <= y1 < src_h else 0.0)
            x0c = min(max(x0, 0), src_w - 1)
            x1c = min(max(x1, 0), src_w - 1)
            r0 = min(max(y0, 0), src_h - 1) * src_w
            r1 = min(max(y1, 0), src_h - 1) * src_w
            for c in range(channels):
                acc = (wy0 * wx0) * flat[r0 + x0c, c]
                acc += (wy0 * wx1) * flat[r0 + x1c, c]
                acc += (wy1 * wx0) * flat[r1 + x0c, c]
                acc += (wy1 * wx1) * flat[r1 + x1c, c]
                out[i, j, c] = acc


if _njit is not None:
    _bilinear_loop = _njit(cache=True)(_bilinear_loop)


def _bilinear_sample(pixels: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample (H, W, C) pixels at continuous coords, zero outside."""
    src_h, src_w = pixels.shape[:2]
    channels = pixels.shape[2]
    flat = np.ascontiguousarray(pixels).reshape(-1, channels)
    out = np.zeros(sx.shape + (channels,), dtype=np.float64)
    sx = np.ascontiguousarray(sx, dtype=np.float64)
    sy = np.ascontiguousarray(sy, dtype=np.float64)
    if _njit is not None:
        _bilinear_loop(flat, src_h, src_w, sx, sy, out)
    else:
        _bilinear_numpy(flat, src_h, src_w, sx, sy, out)
    return out


def source_support(t: Affine2D, f: FrameSize, w: int, h: int) -> tuple[int, int, int, int]:
    """Pixel rect of the source (width w, height h) that the warp can read,
    padded by one tap and clipped to the raster: (x0, y0, x1, y1)."""
    inv = t.inverse()
    corners = [inv.apply(x, y) for x, y in ((0, 0), (f.w, 0), (0, f.h), (f.w, f.h))]
    xs = [c[0] for c in corners]
    ys = [c[1] for c in corners]
    x0 = max(0, math.floor(min(xs)) - 1)
    y0 = max(0, math.floor(min(ys)) - 1)
    x1 = min(w, math.ceil(max(xs)) + 2)
    y1 = min(h, math.ceil(max(ys)) + 2)
    return x0, y0, x1, y1


def crop_and_fill(frame: ImageFrame, t: Affine2D, f: FrameSize) -> ImageFrame:
    """Warp ``frame`` through ``t`` onto an output raster of size ``f``.

    Every output pixel is sampled at the inverse-mapped position with
    bilinear interpolation; out-of-source samples are black.  Raises if
    ``t`` is singular.
    """
    inv = t.inverse().m
    h, w = frame.pixels.shape[:2]
    ys, xs = np.mgrid[0 : f.h, 0 : f.w].astype(np.float64)
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]

    # Restrict the gather to the support rect.  The padded rect contains
    # every tap of every sample, and clipped rect edges coincide with frame
    # edges, so sampling the crop is exactly equivalent to sampling the full
    # raster while keeping large world rasters out of the hot loop.
    x0, y0, x1, y1 = source_support(t, f, w, h)
    if x1 <= x0 or y1 <= y0:
        out = np.zeros((f.h, f.w, frame.pixels.shape[2]), dtype=np.float64)
    else:
        sub = frame.pixels[y0:y1, x0:x1]
        out = _bilinear_sample(sub, sx - x0, sy - y0)
    return ImageFrame(_quantize_like(out, frame), frame.spec)


def _quantize_like(values: np.ndarray, frame: ImageFrame) -> np.ndarray:
    dtype = frame.pixels.dtype
    if np.issubdtype(dtype, np.integer):
        info = np.iinfo(dtype)
        return np.rint(np.clip(values, info.min, info.max)).astype(dtype)
    return values.astype(dtype)


def _catmull_rom_weights(t: np.ndarray) -> np.ndarray:
    """Weights for the 4 taps at offsets -1..2, Catmull-Rom a = -0.5."""
    a = -0.5
    offs = np.array([-1.0, 0.0, 1.0, 2.0])
    x = np.abs(t[:, None] - offs[None, :])
    w = np.where(
        x <= 1.0,
        (a + 2.0) * x**3 - (a + 3.0) * x**2 + 1.0,
        np.where(x < 2.0, a * x**3 - 5.0 * a * x**2 + 8.0 * a * x - 4.0 * a, 0.0),
    )
    return w


def _upscale_axis(values: np.ndarray, r: int, axis: int) -> np.ndarray:
    n = values.shape[axis]
    src = (np.arange(n * r) + 0.5) / r - 0.5
    base = np.floor(src).astype(np.int64)
    w = _catmull_rom_weights(src - base)
    acc = np.zeros((n * r,) + values.shape[:axis] + values.shape[axis + 1 :])
    moved = np.moveaxis(values, axis, 0)
    for k in range(4):
        idx = np.clip(base + (k - 1), 0, n - 1)
        shape = (-1,) + (1,) * (values.ndim - 1)
        acc += w[:, k].reshape(shape) * moved[idx]
    return np.moveaxis(acc, 0, axis)


def bicubic_upscale(frame: ImageFrame, r: int) -> ImageFrame:
    """Catmull-Rom bicubic upscale to r-times size (replicated borders)."""
    if r < 1 or int(r) != r:
        raise ValueError(f"upscale factor must be a positive integer, got {r}")
    if r == 1:
        return frame.copy()
    vals = frame.pixels.astype(np.float64)
    vals = _upscale_axis(vals, int(r), axis=0)
    vals = _upscale_axis(vals, int(r), axis=1)
    return ImageFrame(_quantize_like(vals, frame), frame.spec)


def roi_fits_after_scale(target: BoundingBox, f: FrameSize, zp: ZoomParams, s: float) -> bool:
    """Does the alpha-expanded box, scaled by s, fit inside the frame?"""
    return (
        s * zp.alpha * target.width <= f.w + 1e-9
        and s * zp.alpha * target.height <= f.h + 1e-9
    )
