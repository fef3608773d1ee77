import math

import numpy as np
import pytest

from ptzkit.frames import ImageFrame
from ptzkit.superres import (
    BlockWeights,
    SRConfig,
    SRNetwork,
    feature_aggregate,
    identity_network,
    layer_norm,
    load_weights,
    msa_forward,
    pixel_shuffle,
    random_network,
    save_weights,
    sr_forward,
    swin_block_forward,
)


def test_layer_norm_hand_values():
    out = layer_norm(np.array([1.0, 2.0, 3.0]), 1.0, 0.0, 1e-12)
    assert np.allclose(out, [-1.2247, 0.0, 1.2247], atol=1e-3)

    out = layer_norm(np.full(5, 3.3), 1.0, 0.0, 1e-6)
    assert np.allclose(out, 0.0, atol=1e-3)

    out = layer_norm(np.array([4.0, 9.0, -2.0]), 0.0, 0.7, 1e-12)
    assert np.allclose(out, 0.7)


def _rand_block(rng, d, h, scale=0.3):
    dh = d // h
    return BlockWeights(
        w_q=rng.normal(size=(h, d, dh)) * scale,
        w_k=rng.normal(size=(h, d, dh)) * scale,
        w_v=rng.normal(size=(h, d, dh)) * scale,
        w_o=rng.normal(size=(h, dh, d)) * scale,
        ln_scale=np.ones(d),
        ln_offset=np.zeros(d),
    )


def test_msa_single_token():
    rng = np.random.default_rng(0)
    d, h = 8, 2
    block = _rand_block(rng, d, h)
    x = rng.normal(size=(1, d))
    out = msa_forward(x, block)
    expected = sum(x @ block.w_v[i] @ block.w_o[i] for i in range(h))
    assert np.allclose(out, expected, atol=1e-12)


def test_msa_zero_weights():
    d, h = 6, 3
    zeros = BlockWeights(
        w_q=np.zeros((h, d, d // h)), w_k=np.zeros((h, d, d // h)),
        w_v=np.zeros((h, d, d // h)), w_o=np.zeros((h, d // h, d)),
        ln_scale=np.ones(d), ln_offset=np.zeros(d),
    )
    out = msa_forward(np.random.default_rng(1).normal(size=(4, d)), zeros)
    assert np.allclose(out, 0.0)


def _dense_attention_oracle(x, block):
    """Brute-force per-head attention with explicit loops."""
    n, d = x.shape
    h, _, dh = block.w_q.shape
    total = np.zeros((n, d))
    for i in range(h):
        q = x @ block.w_q[i]
        k = x @ block.w_k[i]
        v = x @ block.w_v[i]
        out_i = np.zeros((n, dh))
        for a in range(n):
            logits = np.array([q[a] @ k[b] / math.sqrt(dh) for b in range(n)])
            logits -= logits.max()
            weights = np.exp(logits)
            weights /= weights.sum()
            for b in range(n):
                out_i[a] += weights[b] * v[b]
        total += out_i @ block.w_o[i]
    return total


@pytest.mark.parametrize("n,d,h", [(4, 8, 1), (4, 8, 2), (16, 12, 3), (9, 10, 5)])
def test_msa_matches_dense_oracle(n, d, h):
    rng = np.random.default_rng(n * 100 + d + h)
    block = _rand_block(rng, d, h)
    x = rng.normal(size=(n, d))
    out = msa_forward(x, block)
    assert out.shape == x.shape
    assert np.abs(out - _dense_attention_oracle(x, block)).max() < 1e-6


def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(4)
    block = _rand_block(rng, 8, 2)
    x = rng.normal(size=(50, 16, 8))  # 50 windows of 16 tokens
    _, attn = msa_forward(x, block, return_attn=True)
    assert np.abs(attn.sum(axis=-1) - 1.0).max() < 1e-6


def test_feature_aggregate_k0_identity():
    net = identity_network(r=2)
    x = np.random.default_rng(2).normal(size=(6, 6, 3))
    assert np.array_equal(feature_aggregate(x, net), x)


def test_zero_weight_blocks_hand_trace():
    # With zero MSA weights every block is LN(X), so the aggregate is
    # X + K * LN(X); check on a single-token map.
    d, h, K = 6, 2, 3
    zeros = BlockWeights(
        w_q=np.zeros((h, d, d // h)), w_k=np.zeros((h, d, d // h)),
        w_v=np.zeros((h, d, d // h)), w_o=np.zeros((h, d // h, d)),
        ln_scale=np.ones(d), ln_offset=np.zeros(d),
    )
    net = SRNetwork(window=1, r=2, d=d, heads=h,
                    w_embed=np.zeros((3, d)), blocks=[zeros] * K,
                    w_up=np.zeros((d, 4 * 3)), ln_eps=1e-5)
    x = np.arange(d, dtype=float).reshape(1, 1, d)
    got = feature_aggregate(x, net)
    ln = (x - x.mean()) / np.sqrt(x.var() + 1e-5)
    assert np.allclose(got, x + K * ln, atol=1e-12)


def test_swin_block_shape_preserved_with_padding():
    rng = np.random.default_rng(6)
    d, h = 8, 2
    block = _rand_block(rng, d, h)
    for shape in ((8, 8), (9, 13), (16, 24), (11, 8)):
        x = rng.normal(size=shape + (d,))
        out = swin_block_forward(x, block, window=4, ln_eps=1e-5)
        assert out.shape == x.shape
        assert np.all(np.isfinite(out))


def test_pixel_shuffle_definition():
    x = np.array([[[1.0, 2.0, 3.0, 4.0]]])  # 1x1, C*r^2 = 4
    out = pixel_shuffle(x, 2)
    assert out.shape == (2, 2, 1)
    assert np.array_equal(out[:, :, 0], [[1, 2], [3, 4]])

    same = pixel_shuffle(x, 1)
    assert np.array_equal(same, x)


def test_pixel_shuffle_is_bijection():
    rng = np.random.default_rng(8)
    for r in (2, 3, 4):
        x = rng.normal(size=(5, 7, 2 * r * r))
        out = pixel_shuffle(x, r)
        assert out.shape == (5 * r, 7 * r, 2)
        assert np.array_equal(np.sort(out.ravel()), np.sort(x.ravel()))
        assert np.isclose((out**2).sum(), (x**2).sum())


def test_pixel_shuffle_rejects_indivisible():
    with pytest.raises(ValueError):
        pixel_shuffle(np.zeros((2, 2, 6)), 2)


def test_sr_forward_shape_and_determinism():
    rng = np.random.default_rng(10)
    net = random_network(SRConfig(window=4, d=8, heads=2, blocks=1, r=2), seed=5)
    frame = ImageFrame(rng.integers(0, 256, (16, 16, 3), dtype=np.uint8))
    out1 = sr_forward(frame, net)
    out2 = sr_forward(frame, net)
    assert out1.pixels.shape == (32, 32, 3)
    assert np.array_equal(out1.pixels, out2.pixels)
    assert np.all(np.isfinite(out1.pixels.astype(float)))


@pytest.mark.parametrize("shape,r", [((8, 8), 2), ((16, 24), 3), ((9, 13), 2), ((12, 12), 4)])
def test_sr_forward_exact_factor(shape, r):
    rng = np.random.default_rng(shape[0] + r)
    net = random_network(SRConfig(window=4, d=8, heads=2, blocks=1, r=r), seed=1)
    frame = ImageFrame(rng.integers(0, 256, shape + (3,), dtype=np.uint8))
    out = sr_forward(frame, net)
    assert out.pixels.shape == (shape[0] * r, shape[1] * r, 3)


def test_sr_identity_network_is_nearest_neighbor():
    rng = np.random.default_rng(12)
    px = rng.integers(0, 256, (6, 5, 3), dtype=np.uint8)
    frame = ImageFrame(px)
    for r in (2, 3):
        out = sr_forward(frame, identity_network(r=r))
        expected = px.repeat(r, axis=0).repeat(r, axis=1)
        assert np.array_equal(out.pixels, expected)


def test_sr_forward_rejects_small_roi():
    net = random_network(SRConfig(window=8, d=8, heads=2, blocks=1), seed=0)
    frame = ImageFrame(np.zeros((4, 4, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        sr_forward(frame, net)


def test_weights_roundtrip(tmp_path):
    net = random_network(SRConfig(window=4, d=8, heads=2, blocks=2, r=3), seed=42)
    path = tmp_path / "weights.srw"
    save_weights(path, net)
    loaded = load_weights(path)
    assert loaded.window == net.window
    assert loaded.r == net.r
    assert loaded.seed == 42
    assert np.array_equal(loaded.w_embed, net.w_embed.astype(np.float32).astype(np.float64))
    assert np.array_equal(loaded.w_up, net.w_up.astype(np.float32).astype(np.float64))
    for got, ref in zip(loaded.blocks, net.blocks):
        for name in ("w_q", "w_k", "w_v", "w_o", "ln_scale", "ln_offset"):
            assert np.array_equal(
                getattr(got, name),
                getattr(ref, name).astype(np.float32).astype(np.float64),
            )
    # a second cycle is exact
    save_weights(path, loaded)
    again = load_weights(path)
    assert np.array_equal(again.w_embed, loaded.w_embed)

    # same frame through saved and loaded nets matches bit for bit
    rng = np.random.default_rng(3)
    frame = ImageFrame(rng.integers(0, 256, (8, 8, 3), dtype=np.uint8))
    assert np.array_equal(sr_forward(frame, loaded).pixels,
                          sr_forward(frame, again).pixels)


def test_network_shape_validation():
    with pytest.raises(ValueError):
        SRNetwork(window=4, r=5, d=8, heads=2, w_embed=np.zeros((3, 8)),
                  blocks=[], w_up=np.zeros((8, 75)))
    with pytest.raises(ValueError):
        SRNetwork(window=4, r=2, d=9, heads=2, w_embed=np.zeros((3, 9)),
                  blocks=[], w_up=np.zeros((9, 12)))
    with pytest.raises(ValueError):
        SRNetwork(window=4, r=2, d=8, heads=2, w_embed=np.zeros((4, 8)),
                  blocks=[], w_up=np.zeros((8, 12)))
