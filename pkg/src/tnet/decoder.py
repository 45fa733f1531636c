"""Localization-and-complementation decoder.

RGB-dominant single-stream decoding. At each level the upsampled decoder
features are re-weighted by spatial attention over gated thermal features
(localization), then fused with an alpha-blended skip connection through
channel attention (complementation).
"""
from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .errors import ConfigError, ShapeError
from .illumination import ALPHA_EPS
from .scp import as_gate, upsample


@dataclass(frozen=True)
class AblationToggles:
    use_gie: bool = True
    use_scp: bool = True
    use_localization: bool = True
    use_complementation: bool = True
    scp_concat_variant: bool = False
    skip_direct_addition: bool = False

    def __post_init__(self):
        if self.scp_concat_variant and not self.use_scp:
            raise ConfigError("scp_concat_variant requires use_scp")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# Named toggle presets for ablation runs.
ABLATIONS = {
    "full": AblationToggles(),
    "wo_gie": AblationToggles(use_gie=False),
    "wo_scp": AblationToggles(use_scp=False),
    "scp_concat": AblationToggles(scp_concat_variant=True),
    "wo_lc": AblationToggles(use_localization=False, skip_direct_addition=True),
    "wo_localization": AblationToggles(use_localization=False),
    "wo_complementation": AblationToggles(use_complementation=False),
    "direct_addition": AblationToggles(skip_direct_addition=True),
}


@dataclass
class DecoderState:
    D: list  # D[0] is level 1 ... D[4] is level 5
    side_outputs: list  # per-level logits at the level's own resolution, level 1 first
    final: torch.Tensor  # (B, 1, H, W) in (0, 1)
    final_logits: torch.Tensor = field(repr=False, default=None)


class SpatialAttention(nn.Module):
    """CBAM spatial attention: channel mean and max -> 7x7 conv -> sigmoid map."""

    def __init__(self, kernel_size=7):
        super().__init__()
        self.conv = nn.Conv2d(2, 1, kernel_size, padding=kernel_size // 2, bias=True)

    def forward(self, x):
        pooled = torch.cat([x.mean(dim=1, keepdim=True), x.max(dim=1, keepdim=True)[0]], dim=1)
        return torch.sigmoid(self.conv(pooled))


class ChannelAttention(nn.Module):
    """Squeeze-and-excitation channel re-weighting."""

    def __init__(self, channels, reduction=4):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def weights(self, x):
        s = x.mean(dim=(2, 3))
        return torch.sigmoid(self.fc2(torch.relu(self.fc1(s))))

    def forward(self, x):
        return x * self.weights(x)[:, :, None, None]


class UpBlock(nn.Module):
    """2x bilinear upsampling followed by two conv-BN-ReLU layers."""

    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(channels)

    def forward(self, x, size=None):
        if size is None:
            size = (2 * x.shape[-2], 2 * x.shape[-1])
        x = upsample(x, size)
        x = torch.relu(self.bn1(self.conv1(x)))
        return torch.relu(self.bn2(self.conv2(x)))


def up_block(d_next, block, size=None):
    return block(d_next, size)


def localize(d_up, e_t_hat, alpha, sa, gated=True):
    """``D_L = D_up + SA((1 - alpha) * E_t_hat) * D_up``."""
    if d_up.shape[-2:] != e_t_hat.shape[-2:]:
        raise ShapeError(f"localize: decoder {tuple(d_up.shape[-2:])} vs thermal {tuple(e_t_hat.shape[-2:])}")
    gate = 1.0 - as_gate(alpha, e_t_hat) if gated else 1.0
    return d_up + sa(gate * e_t_hat) * d_up


def complement_skip(e_r, e_t_hat, alpha, direct=False, gated=True):
    """Skip features: ``alpha * E_r + (1 - alpha) * E_t_hat`` (or plain sum)."""
    if e_r.shape != e_t_hat.shape:
        raise ShapeError(f"complement_skip: rgb {tuple(e_r.shape)} vs thermal {tuple(e_t_hat.shape)}")
    if direct or not gated:
        return e_r + e_t_hat
    a = as_gate(alpha, e_r)
    return a * e_r + (1.0 - a) * e_t_hat


def fuse_decode(f_c, d_l, ca, conv):
    if f_c.shape != d_l.shape:
        raise ShapeError(f"fuse_decode: skip {tuple(f_c.shape)} vs decoder {tuple(d_l.shape)}")
    return conv(ca(torch.cat([f_c, d_l], dim=1)))


class LCDecoder(nn.Module):
    def __init__(self, rgb_channels, thermal_channels, width=64, reduction=4):
        super().__init__()
        self.width = width
        self.seed = nn.Conv2d(rgb_channels[4], width, 1)
        self.rgb_adapt = nn.ModuleList(nn.Conv2d(c, width, 1) for c in rgb_channels)
        self.thermal_adapt = nn.ModuleList(nn.Conv2d(c, width, 1) for c in thermal_channels)
        self.up = nn.ModuleList(UpBlock(width) for _ in range(4))  # up[i] produces level i+1
        self.sa = nn.ModuleList(SpatialAttention() for _ in range(5))
        self.ca = nn.ModuleList(ChannelAttention(2 * width, reduction) for _ in range(5))
        self.fuse = nn.ModuleList(nn.Conv2d(2 * width, width, 1) for _ in range(5))
        self.side = nn.ModuleList(nn.Conv2d(width, 1, 1) for _ in range(5))

    def level(self, i, d_up, e_r, e_t_hat, alpha, toggles):
        """One LC step at pyramid level ``i`` (1..5)."""
        k = i - 1
        gated = toggles.use_gie
        d_l = localize(d_up, e_t_hat, alpha, self.sa[k], gated) if toggles.use_localization else d_up
        if not toggles.use_complementation:
            return d_l
        f_c = complement_skip(
            self.rgb_adapt[k](e_r), self.thermal_adapt[k](e_t_hat), alpha,
            direct=toggles.skip_direct_addition, gated=gated,
        )
        return fuse_decode(f_c, d_l, self.ca[k], self.fuse[k])

    def forward(self, rgb_levels, thermal_levels, alpha, toggles, out_size):
        D = [None] * 5
        d = self.level(5, self.seed(rgb_levels[4]), rgb_levels[4], thermal_levels[4], alpha, toggles)
        D[4] = d
        for i in range(4, 0, -1):
            d_up = up_block(d, self.up[i - 1], rgb_levels[i - 1].shape[-2:])
            d = self.level(i, d_up, rgb_levels[i - 1], thermal_levels[i - 1], alpha, toggles)
            D[i - 1] = d
        sides = [head(x) for head, x in zip(self.side, D)]
        final_logits = upsample(sides[0], out_size)
        final = torch.sigmoid(final_logits).clamp(ALPHA_EPS, 1.0 - ALPHA_EPS)
        return DecoderState(D, sides, final, final_logits)


def decode(rgb_pyramid, thermal_pyramid, alpha, toggles, decoder, out_size):
    return decoder(list(rgb_pyramid), list(thermal_pyramid), alpha, toggles, out_size)
