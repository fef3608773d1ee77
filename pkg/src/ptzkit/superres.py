"""Windowed self-attention super-resolution forward pass.

Network structure, applied to an RGB region normalized to [0, 1]:

1. per-pixel linear embedding, 3 -> d channels
2. K residual window-attention blocks, summed in parallel:
   Y = X + sum_k Block_k(X), with Block(X) = LN(MSA(X) + X) per window
3. per-pixel linear expansion d -> r*r*3 (the upsampling kernel)
4. pixel shuffle (depth to space) producing the r-times larger raster

Per head, MSA computes softmax(Q K^T / sqrt(d/h)) V, and head outputs are
summed after their output projections.  Feature maps are channel-last
(H, W, C) everywhere; window tokens are row-major within a window.  Frames
whose sides are not multiples of the window are padded reflectively and
cropped back after.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .frames import ImageFrame

WEIGHTS_FORMAT = "sr-weights/1"


@dataclass
class BlockWeights:
    """One residual attention block: per-head projections plus layer norm."""

    w_q: np.ndarray  # (h, d, d//h)
    w_k: np.ndarray  # (h, d, d//h)
    w_v: np.ndarray  # (h, d, d//h)
    w_o: np.ndarray  # (h, d//h, d)
    ln_scale: np.ndarray  # (d,)
    ln_offset: np.ndarray  # (d,)


@dataclass
class SRNetwork:
    window: int
    r: int
    d: int
    heads: int
    w_embed: np.ndarray  # (3, d)
    blocks: list[BlockWeights]
    w_up: np.ndarray  # (d, r*r*3)
    ln_eps: float = 1e-5
    seed: int | None = None

    def __post_init__(self):
        if self.r not in (2, 3, 4):
            raise ValueError(f"upsampling factor must be 2, 3 or 4, got {self.r}")
        if self.d % self.heads != 0:
            raise ValueError(f"channels {self.d} not divisible by heads {self.heads}")
        if self.window < 1:
            raise ValueError("window must be positive")
        dh = self.d // self.heads
        if self.w_embed.shape != (3, self.d):
            raise ValueError(f"w_embed must be (3, d), got {self.w_embed.shape}")
        if self.w_up.shape != (self.d, self.r * self.r * 3):
            raise ValueError(f"w_up must be (d, r*r*3), got {self.w_up.shape}")
        for i, b in enumerate(self.blocks):
            for name, arr, shape in (
                ("w_q", b.w_q, (self.heads, self.d, dh)),
                ("w_k", b.w_k, (self.heads, self.d, dh)),
                ("w_v", b.w_v, (self.heads, self.d, dh)),
                ("w_o", b.w_o, (self.heads, dh, self.d)),
                ("ln_scale", b.ln_scale, (self.d,)),
                ("ln_offset", b.ln_offset, (self.d,)),
            ):
                if arr.shape != shape:
                    raise ValueError(f"block {i} {name} must be {shape}, got {arr.shape}")

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True)
class SRConfig:
    window: int = 8
    r: int = 2
    d: int = 32
    heads: int = 4
    blocks: int = 2
    ln_eps: float = 1e-5
    weight_scale: float = 0.05


def random_network(cfg: SRConfig = SRConfig(), seed: int = 0) -> SRNetwork:
    """Seeded pseudorandom weights; small scale keeps activations tame."""
    rng = np.random.default_rng(seed)
    dh = cfg.d // cfg.heads
    sc = cfg.weight_scale

    def w(*shape):
        return rng.standard_normal(shape) * sc

    blocks = [
        BlockWeights(
            w_q=w(cfg.heads, cfg.d, dh),
            w_k=w(cfg.heads, cfg.d, dh),
            w_v=w(cfg.heads, cfg.d, dh),
            w_o=w(cfg.heads, dh, cfg.d),
            ln_scale=np.ones(cfg.d),
            ln_offset=np.zeros(cfg.d),
        )
        for _ in range(cfg.blocks)
    ]
    return SRNetwork(
        window=cfg.window,
        r=cfg.r,
        d=cfg.d,
        heads=cfg.heads,
        w_embed=w(3, cfg.d),
        blocks=blocks,
        w_up=w(cfg.d, cfg.r * cfg.r * 3),
        ln_eps=cfg.ln_eps,
        seed=seed,
    )


def layer_norm(x: np.ndarray, scale: np.ndarray, offset: np.ndarray, eps: float) -> np.ndarray:
    """Normalize over the last (channel) axis with population variance."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + eps) * scale + offset


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def msa_forward(x: np.ndarray, block: BlockWeights, return_attn: bool = False):
    """Multi-head self-attention over window tokens.

    ``x`` is (..., n, d): any number of leading window batch dims, n tokens,
    d channels.  Heads are summed after their output projections; the output
    shape equals the input shape.
    """
    x = np.asarray(x, dtype=np.float64)
    d = block.w_q.shape[1]
    if x.shape[-1] != d:
        raise ValueError(f"token channels {x.shape[-1]} != weight channels {d}")
    dh = block.w_q.shape[2]
    # (..., n, d) x (h, d, dh) -> (..., h, n, dh)
    q = np.einsum("...nd,hde->...hne", x, block.w_q)
    k = np.einsum("...nd,hde->...hne", x, block.w_k)
    v = np.einsum("...nd,hde->...hne", x, block.w_v)
    logits = np.einsum("...hne,...hme->...hnm", q, k) / np.sqrt(dh)
    attn = softmax(logits, axis=-1)
    heads = np.einsum("...hnm,...hme->...hne", attn, v)
    out = np.einsum("...hne,hed->...nd", heads, block.w_o)
    if return_attn:
        return out, attn
    return out


def _partition_windows(x: np.ndarray, win: int) -> tuple[np.ndarray, tuple[int, int]]:
    """(H, W, d) -> (nWin, win*win, d) with reflective padding to multiples."""
    h, w, d = x.shape
    ph = (-h) % win
    pw = (-w) % win
    if ph or pw:
        x = np.pad(x, ((0, ph), (0, pw), (0, 0)), mode="reflect")
    hh, ww = x.shape[0] // win, x.shape[1] // win
    tiles = x.reshape(hh, win, ww, win, d).transpose(0, 2, 1, 3, 4)
    return tiles.reshape(hh * ww, win * win, d), (hh, ww)


def _merge_windows(tokens: np.ndarray, grid: tuple[int, int], win: int, h: int, w: int) -> np.ndarray:
    hh, ww = grid
    d = tokens.shape[-1]
    tiles = tokens.reshape(hh, ww, win, win, d).transpose(0, 2, 1, 3, 4)
    full = tiles.reshape(hh * win, ww * win, d)
    return full[:h, :w]


def swin_block_forward(x: np.ndarray, block: BlockWeights, window: int, ln_eps: float) -> np.ndarray:
    """Per-window MSA with residual then layer norm; shape preserved."""
    h, w, _ = x.shape
    tokens, grid = _partition_windows(x, window)
    y = msa_forward(tokens, block) + tokens
    y = layer_norm(y, block.ln_scale, block.ln_offset, ln_eps)
    return _merge_windows(y, grid, window, h, w)


def feature_aggregate(x: np.ndarray, net: SRNetwork) -> np.ndarray:
    """Residual multi-block aggregation: X + sum_k Block_k(X)."""
    out = np.array(x, dtype=np.float64)
    for block in net.blocks:
        out = out + swin_block_forward(x, block, net.window, net.ln_eps)
    return out


def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """Depth-to-space: (H, W, C*r*r) -> (H*r, W*r, C), a value bijection."""
    if r < 1 or int(r) != r:
        raise ValueError(f"shuffle factor must be a positive integer, got {r}")
    h, w, c_full = x.shape
    if c_full % (r * r) != 0:
        raise ValueError(f"channels {c_full} not divisible by r^2 = {r * r}")
    c = c_full // (r * r)
    y = x.reshape(h, w, c, r, r)
    y = y.transpose(0, 3, 1, 4, 2)  # (h, r, w, r, c)
    return y.reshape(h * r, w * r, c)


def sr_forward(p: ImageFrame, net: SRNetwork) -> ImageFrame:
    """Full forward pass on an ROI; output is exactly r-times the input size."""
    if min(p.height, p.width) < net.window:
        raise ValueError(
            f"ROI {p.width}x{p.height} smaller than attention window {net.window}"
        )
    maxv = float(p.spec.max_value)
    x = p.pixels.astype(np.float64) / maxv
    feat = x @ net.w_embed
    feat = feature_aggregate(feat, net)
    expanded = feat @ net.w_up
    up = pixel_shuffle(expanded, net.r)
    out = np.clip(up, 0.0, 1.0) * maxv
    return ImageFrame(np.rint(out).astype(p.pixels.dtype), p.spec)


def identity_network(r: int = 2, window: int = 1) -> SRNetwork:
    """No blocks, identity embedding, channel-replicating upsample kernel.

    The forward pass then reduces to nearest-neighbor r-times upsampling.
    """
    d = 3
    w_up = np.zeros((d, r * r * 3))
    for c in range(3):
        for kk in range(r * r):
            w_up[c, c * r * r + kk] = 1.0
    return SRNetwork(
        window=window, r=r, d=d, heads=1,
        w_embed=np.eye(3), blocks=[], w_up=w_up,
    )


def save_weights(path, net: SRNetwork) -> None:
    """JSON header line with the shape manifest, then raw little-endian f32."""
    tensors: list[tuple[str, np.ndarray]] = [("w_embed", net.w_embed)]
    for i, b in enumerate(net.blocks):
        for name in ("w_q", "w_k", "w_v", "w_o", "ln_scale", "ln_offset"):
            tensors.append((f"block{i}.{name}", getattr(b, name)))
    tensors.append(("w_up", net.w_up))
    header = {
        "format": WEIGHTS_FORMAT,
        "window": net.window,
        "r": net.r,
        "d": net.d,
        "heads": net.heads,
        "blocks": net.num_blocks,
        "ln_eps": net.ln_eps,
        "seed": net.seed,
        "tensors": [[name, list(arr.shape)] for name, arr in tensors],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_weights(path) -> SRNetwork:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != WEIGHTS_FORMAT:
        raise ValueError(f"unsupported weights format {header.get('format')!r}")
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    arrays: dict[str, np.ndarray] = {}
    pos = 0
    for name, shape in header["tensors"]:
        n = int(np.prod(shape))
        if pos + n > flat.size:
            raise ValueError(f"weights file truncated at tensor {name!r}")
        arrays[name] = flat[pos : pos + n].reshape(shape)
        pos += n
    if pos != flat.size:
        raise ValueError("weights file has trailing data")
    blocks = [
        BlockWeights(
            w_q=arrays[f"block{i}.w_q"],
            w_k=arrays[f"block{i}.w_k"],
            w_v=arrays[f"block{i}.w_v"],
            w_o=arrays[f"block{i}.w_o"],
            ln_scale=arrays[f"block{i}.ln_scale"],
            ln_offset=arrays[f"block{i}.ln_offset"],
        )
        for i in range(header["blocks"])
    ]
    return SRNetwork(
        window=header["window"],
        r=header["r"],
        d=header["d"],
        heads=header["heads"],
        w_embed=arrays["w_embed"],
        blocks=blocks,
        w_up=arrays["w_up"],
        ln_eps=header["ln_eps"],
        seed=header.get("seed"),
    )
