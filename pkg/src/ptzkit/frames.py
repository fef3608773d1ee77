"""Image frames: raster pixels plus the format descriptor they commit to.

A frame's pixel buffer is an (H, W, 3) numpy array.  Conforming frames use
the dtype implied by their declared bit depth (uint8 or uint16); working
buffers inside the pipeline may temporarily be wider (uint16/float) while
still declaring the target format, which is what the format guard checks.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

DEFAULT_COLOR_SPACE = "srgb"

_DTYPES = {8: np.uint8, 16: np.uint16}


@dataclass(frozen=True)
class FormatSpec:
    """Declared frame format: bit depth, color space tag, flat metadata."""

    bit_depth: int = 8
    color_space: str = DEFAULT_COLOR_SPACE
    metadata: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.bit_depth not in _DTYPES:
            raise ValueError(f"bit depth must be 8 or 16, got {self.bit_depth}")
        keys = [k for k, _ in self.metadata]
        if len(keys) != len(set(keys)):
            raise ValueError("metadata keys must be unique")

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(_DTYPES[self.bit_depth])


@dataclass
class ImageFrame:
    """An RGB raster with its declared format."""

    pixels: np.ndarray
    spec: FormatSpec = field(default_factory=FormatSpec)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must be (H, W, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def conforming(self) -> bool:
        """True if the pixel buffer dtype matches the declared bit depth."""
        return self.pixels.dtype == self.spec.dtype

    def copy(self) -> "ImageFrame":
        return ImageFrame(self.pixels.copy(), self.spec)


def solid_frame(w: int, h: int, rgb=(0, 0, 0), spec: FormatSpec | None = None) -> ImageFrame:
    spec = spec or FormatSpec()
    px = np.empty((h, w, 3), dtype=spec.dtype)
    px[:, :] = rgb
    return ImageFrame(px, spec)


def encode_png(frame: ImageFrame) -> bytes:
    """Deterministic PNG encoding of a conforming frame."""
    px = frame.pixels
    if px.dtype == np.uint8:
        img = Image.fromarray(px, mode="RGB")
    elif px.dtype == np.uint16:
        # Pillow has no 16-bit RGB mode; pack channels side by side.
        img = Image.fromarray(px.reshape(px.shape[0], -1))
    else:
        raise ValueError(f"cannot encode dtype {px.dtype}; quantize first")
    buf = io.BytesIO()
    # Low compression keeps 60 Hz streaming and batch runs cheap; encoding
    # stays deterministic for identical pixels.
    img.save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def decode_png(data: bytes, spec: FormatSpec | None = None) -> ImageFrame:
    spec = spec or FormatSpec()
    img = Image.open(io.BytesIO(data))
    if img.mode == "I;16":
        flat = np.asarray(img, dtype=np.uint16)
        px = flat.reshape(flat.shape[0], flat.shape[1] // 3, 3)
    else:
        px = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return ImageFrame(px.copy(), spec)


def write_png(path, frame: ImageFrame) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(frame))


def read_png(path, spec: FormatSpec | None = None) -> ImageFrame:
    with open(path, "rb") as fh:
        return decode_png(fh.read(), spec)


def write_depth_png(path, depth: np.ndarray) -> None:
    """Store a single-channel uint16 depth map as a 16-bit PNG."""
    if depth.dtype != np.uint16 or depth.ndim != 2:
        raise ValueError("depth must be a 2-D uint16 array")
    Image.fromarray(depth).save(path, format="PNG")


def read_depth_png(path) -> np.ndarray:
    img = Image.open(path)
    return np.asarray(img, dtype=np.uint16).copy()
