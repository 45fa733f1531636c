import numpy as np
import pytest
import torch

from tnet.decoder import (
    ABLATIONS,
    AblationToggles,
    ChannelAttention,
    LCDecoder,
    SpatialAttention,
    UpBlock,
    complement_skip,
    decode,
    fuse_decode,
    localize,
    up_block,
)
from tnet.errors import ConfigError, ShapeError

from oracles import batchnorm_eval, bilinear, channel_attention, conv2d, relu, sigmoid, spatial_attention

D64 = torch.float64


def _rand(*shape, seed=0):
    return torch.randn(*shape, generator=torch.Generator().manual_seed(seed), dtype=D64)


def _np(t):
    return t.detach().numpy()


def _randomise(module, seed):
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in module.named_parameters():
            p.copy_(torch.randn(p.shape, generator=g, dtype=p.dtype) * 0.7)
        for name, b in module.named_buffers():
            if name.endswith("running_mean"):
                b.copy_(torch.randn(b.shape, generator=g, dtype=b.dtype) * 0.2)
            elif name.endswith("running_var"):
                b.copy_(torch.rand(b.shape, generator=g, dtype=b.dtype) + 0.5)
    return module


# -- toggles -----------------------------------------------------------------------

def test_concat_requires_scp():
    with pytest.raises(ConfigError):
        AblationToggles(use_scp=False, scp_concat_variant=True)
    assert set(ABLATIONS) >= {"full", "wo_gie", "wo_scp", "scp_concat", "wo_localization",
                              "wo_complementation", "direct_addition"}


# -- up_block --------------------------------------------------------------------------

def test_up_block_doubles_size():
    blk = UpBlock(4).double().eval()
    assert up_block(_rand(1, 4, 11, 11), blk).shape == (1, 4, 22, 22)


def test_up_block_identity_convs_on_constant():
    blk = UpBlock(3).double().eval()
    with torch.no_grad():
        for conv in (blk.conv1, blk.conv2):
            conv.weight.zero_()
            for c in range(3):
                conv.weight[c, c, 1, 1] = 1.0
    bn_scale = 1 / (1 + blk.bn1.eps)  # two unit-stat BNs in eval
    for c in (-2.0, 0.7):
        out = up_block(torch.full((1, 3, 4, 4), c, dtype=D64), blk)
        assert torch.allclose(out, torch.full_like(out, max(c, 0.0) * bn_scale))
        assert (out >= 0).all()


def test_up_block_matches_stage_by_stage_reference():
    blk = _randomise(UpBlock(2).double(), 1).eval()
    x = _rand(1, 2, 4, 4, seed=2)
    out = up_block(x, blk)
    ref = bilinear(_np(x[0]), 8, 8)
    for conv, bn in ((blk.conv1, blk.bn1), (blk.conv2, blk.bn2)):
        ref = conv2d(ref, _np(conv.weight), padding=1)
        ref = relu(batchnorm_eval(ref, _np(bn.running_mean), _np(bn.running_var), _np(bn.weight), _np(bn.bias)))
    np.testing.assert_allclose(_np(out[0]), ref, atol=1e-12)


# -- localize ------------------------------------------------------------------------------

def test_localize_attention_off():
    sa = SpatialAttention().double()
    with torch.no_grad():
        sa.conv.bias.fill_(-30.0)
    d = _rand(1, 3, 6, 6)
    assert torch.allclose(localize(d, _rand(1, 5, 6, 6, seed=1), 0.3, sa), d, atol=1e-4)


def test_localize_attention_saturated():
    sa = SpatialAttention().double()
    with torch.no_grad():
        sa.conv.weight.zero_()
        sa.conv.bias.fill_(30.0)
    d = _rand(1, 3, 6, 6)
    assert torch.allclose(localize(d, _rand(1, 5, 6, 6, seed=1), 0.3, sa), 2 * d, atol=1e-4)


def test_localize_alpha_one_uses_attention_of_zero():
    sa = _randomise(SpatialAttention().double(), 3)
    d, e = _rand(1, 3, 6, 6), _rand(1, 5, 6, 6, seed=1)
    out = localize(d, e, 1.0, sa)
    const = torch.sigmoid(sa.conv.bias)
    assert torch.equal(out - d, (d + const * d) - d)
    assert torch.equal(sa(torch.zeros_like(e)), const.expand(1, 1, 6, 6))


def test_localize_near_one_converges_to_attention_of_zero():
    sa = _randomise(SpatialAttention().double(), 4)
    d, e = _rand(1, 3, 6, 6), _rand(1, 5, 6, 6, seed=1)
    out = localize(d, e, 1 - 1e-6, sa)
    analytic = d + torch.sigmoid(sa.conv.bias) * d
    assert torch.allclose(out, analytic, atol=1e-5)


def test_spatial_attention_matches_reference():
    sa = _randomise(SpatialAttention().double(), 5)
    x = _rand(1, 4, 9, 9)
    ref = spatial_attention(_np(x[0]), _np(sa.conv.weight), _np(sa.conv.bias))
    np.testing.assert_allclose(_np(sa(x)[0]), ref, atol=1e-12)
    assert ((sa(x) > 0) & (sa(x) < 1)).all()


def test_localize_shape_mismatch():
    with pytest.raises(ShapeError):
        localize(torch.zeros(1, 2, 4, 4), torch.zeros(1, 2, 8, 8), 0.5, SpatialAttention())


# -- complement_skip ------------------------------------------------------------------------------

def test_complement_endpoints_are_exact():
    er, et = _rand(2, 3, 5, 5), _rand(2, 3, 5, 5, seed=1)
    assert torch.equal(complement_skip(er, et, 1.0), er)
    assert torch.equal(complement_skip(er, et, 0.0), et)


def test_complement_scalar_example():
    out = complement_skip(torch.full((1, 1, 2, 2), 8.0), torch.full((1, 1, 2, 2), 4.0), 0.25)
    assert torch.equal(out, torch.full((1, 1, 2, 2), 5.0))


def test_complement_direct_addition():
    er, et = _rand(1, 2, 3, 3), _rand(1, 2, 3, 3, seed=1)
    assert torch.equal(complement_skip(er, et, 0.3, direct=True), er + et)


@pytest.mark.parametrize("seed", range(10))
def test_complement_convexity(seed):
    er, et = _rand(2, 3, 5, 5, seed=seed), _rand(2, 3, 5, 5, seed=seed + 100)
    a = torch.rand(2, generator=torch.Generator().manual_seed(seed), dtype=D64)
    f = complement_skip(er, et, a)
    assert (f >= torch.minimum(er, et) - 1e-12).all() and (f <= torch.maximum(er, et) + 1e-12).all()


def test_complement_shape_mismatch():
    with pytest.raises(ShapeError):
        complement_skip(torch.zeros(1, 2, 4, 4), torch.zeros(1, 3, 4, 4), 0.5)


# -- fuse_decode -------------------------------------------------------------------------------------

def test_fuse_with_attention_bypassed():
    ca = ChannelAttention(6).double()
    conv = torch.nn.Conv2d(6, 3, 1).double()
    with torch.no_grad():
        ca.fc2.bias.fill_(40.0)
    f, d = _rand(1, 3, 4, 4), _rand(1, 3, 4, 4, seed=1)
    assert torch.allclose(fuse_decode(f, d, ca, conv), conv(torch.cat([f, d], 1)), atol=1e-4)


def test_fuse_zero_inputs_bias_free():
    ca = ChannelAttention(4).double()
    conv = torch.nn.Conv2d(4, 2, 1, bias=False).double()
    z = torch.zeros(1, 2, 3, 3, dtype=D64)
    assert torch.equal(fuse_decode(z, z, ca, conv), torch.zeros(1, 2, 3, 3, dtype=D64))


def test_fuse_hand_set_two_channel():
    ca = ChannelAttention(2, reduction=4).double()
    conv = torch.nn.Conv2d(2, 1, 1).double()
    with torch.no_grad():
        ca.fc1.weight.copy_(torch.tensor([[0.5, -1.0]]))
        ca.fc1.bias.fill_(0.1)
        ca.fc2.weight.copy_(torch.tensor([[2.0], [-0.5]]))
        ca.fc2.bias.copy_(torch.tensor([0.0, 0.3]))
        conv.weight.copy_(torch.tensor([1.5, -2.0]).view(1, 2, 1, 1))
        conv.bias.fill_(0.25)
    f = torch.tensor([[[[1.0, 2.0], [3.0, 4.0]]]], dtype=D64)
    d = torch.tensor([[[[-1.0, 0.5], [0.0, 2.0]]]], dtype=D64)
    # by hand: GAP = (2.5, 0.375); hidden = relu(1.25 - 0.375 + 0.1) = 0.975
    w = sigmoid(np.array([2 * 0.975, -0.5 * 0.975 + 0.3]))
    expected = 1.5 * w[0] * f[0, 0].numpy() - 2.0 * w[1] * d[0, 0].numpy() + 0.25
    np.testing.assert_allclose(_np(fuse_decode(f, d, ca, conv)[0, 0]), expected, atol=1e-12)


def test_channel_attention_matches_reference():
    ca = _randomise(ChannelAttention(8).double(), 6)
    x = _rand(1, 8, 5, 5)
    ref = channel_attention(_np(x[0]), _np(ca.fc1.weight), _np(ca.fc1.bias), _np(ca.fc2.weight), _np(ca.fc2.bias))
    np.testing.assert_allclose(_np(ca(x)[0]), ref, atol=1e-12)


# -- full decode ------------------------------------------------------------------------------------

SIZES = [8, 4, 2, 1, 1]


def _toy(width=1, seed=0):
    dec = _randomise(LCDecoder([1] * 5, [1] * 5, width=width).double(), seed).eval()
    rgb = [_rand(1, 1, s, s, seed=10 + i) for i, s in enumerate(SIZES)]
    th = [_rand(1, 1, s, s, seed=20 + i) for i, s in enumerate(SIZES)]
    return dec, rgb, th


def _conv1x1(x, conv):
    return conv2d(x, _np(conv.weight), _np(conv.bias))


def reference_decode(dec, rgb, th, alpha, out=16):
    """Straight-line transcription of the LC decoding steps for numpy inputs."""
    rgb = [_np(t[0]) for t in rgb]
    th = [_np(t[0]) for t in th]
    d = None
    D = [None] * 5
    for k in range(4, -1, -1):
        if k == 4:
            d_up = _conv1x1(rgb[4], dec.seed)
        else:
            blk = dec.up[k]
            s = SIZES[k]
            d_up = bilinear(d, s, s)
            for conv, bn in ((blk.conv1, blk.bn1), (blk.conv2, blk.bn2)):
                d_up = conv2d(d_up, _np(conv.weight), padding=1)
                d_up = relu(batchnorm_eval(d_up, _np(bn.running_mean), _np(bn.running_var), _np(bn.weight), _np(bn.bias)))
        sa = dec.sa[k]
        att = spatial_attention((1 - alpha) * th[k], _np(sa.conv.weight), _np(sa.conv.bias))
        d_l = d_up + att * d_up
        f_c = alpha * _conv1x1(rgb[k], dec.rgb_adapt[k]) + (1 - alpha) * _conv1x1(th[k], dec.thermal_adapt[k])
        ca = dec.ca[k]
        z = channel_attention(np.concatenate([f_c, d_l]), _np(ca.fc1.weight), _np(ca.fc1.bias),
                              _np(ca.fc2.weight), _np(ca.fc2.bias))
        d = _conv1x1(z, dec.fuse[k])
        D[k] = d
    side1 = _conv1x1(D[0], dec.side[0])
    return D, sigmoid(bilinear(side1, out, out))[0]


@pytest.mark.parametrize("alpha", [0.2, 0.85])
def test_toy_decode_matches_reference_compositor(alpha):
    dec, rgb, th = _toy()
    state = decode(rgb, th, torch.tensor([alpha], dtype=D64), AblationToggles(), dec, (16, 16))
    D, final = reference_decode(dec, rgb, th, alpha)
    for k in range(5):
        np.testing.assert_allclose(_np(state.D[k][0]), D[k], atol=1e-10)
    np.testing.assert_allclose(_np(state.final[0, 0]), final, atol=1e-10)


def _pyramids(seed=0, width=(4, 6, 8, 10, 12), base=32):
    sizes = [base // 2 ** i for i in range(1, 6)]
    rgb = [_rand(2, c, s, s, seed=seed + i) for i, (c, s) in enumerate(zip(width, sizes))]
    th = [_rand(2, c, s, s, seed=seed + 50 + i) for i, (c, s) in enumerate(zip(width, sizes))]
    return rgb, th


def test_decode_shape_contract_and_range():
    dec = LCDecoder((4, 6, 8, 10, 12), (4, 6, 8, 10, 12), width=8).double().eval()
    rgb, th = _pyramids()
    state = dec(rgb, th, torch.tensor([0.3, 0.7], dtype=D64), AblationToggles(), (64, 64))
    assert [tuple(x.shape[-2:]) for x in state.D] == [(16, 16), (8, 8), (4, 4), (2, 2), (1, 1)]
    assert [x.shape[1] for x in state.side_outputs] == [1] * 5
    assert state.final.shape == (2, 1, 64, 64)
    assert ((state.final > 0) & (state.final < 1)).all()
    assert all(torch.isfinite(s).all() for s in state.side_outputs)


@pytest.mark.parametrize("toggles,prefix", [
    (AblationToggles(use_localization=False), "sa."),
    (AblationToggles(use_complementation=False), "ca."),
    (AblationToggles(use_complementation=False), "fuse."),
    (AblationToggles(use_complementation=False), "rgb_adapt."),
])
def test_disabled_subpath_weights_do_not_matter(toggles, prefix):
    torch.manual_seed(0)
    dec = LCDecoder((4, 6, 8, 10, 12), (4, 6, 8, 10, 12), width=8).double().eval()
    rgb, th = _pyramids()
    a = torch.tensor([0.3, 0.7], dtype=D64)
    before = dec(rgb, th, a, toggles, (32, 32)).final
    with torch.no_grad():
        for name, p in dec.named_parameters():
            if name.startswith(prefix):
                p.add_(torch.randn_like(p))
    assert torch.equal(dec(rgb, th, a, toggles, (32, 32)).final, before)
