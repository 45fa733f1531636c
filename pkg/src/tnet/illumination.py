"""Global illumination estimation: image -> illuminance map -> scalar score alpha.

The decomposition backend is frozen; only the 1->1 quantizer head trains.
"""
import os
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import CheckpointError, ConfigError

BACKENDS = ("luminance_fallback", "retinex_pretrained")
WEIGHTS_FORMAT = "tnet.decomposition"
WEIGHTS_VERSION = 1
# keeps alpha strictly inside (0, 1) in float32
ALPHA_EPS = 2.0 ** -24


@dataclass
class IlluminanceScore:
    alpha: torch.Tensor  # (B,)
    map: torch.Tensor  # (B, 1, H, W)


class DecompositionNet(nn.Module):
    """Small Retinex-style decomposition network returning (reflectance, illumination)."""

    def __init__(self, channels=32, layers=3):
        super().__init__()
        body = [nn.Conv2d(4, channels, 3, padding=1), nn.ReLU(inplace=True)]
        for _ in range(layers):
            body += [nn.Conv2d(channels, channels, 3, padding=1), nn.ReLU(inplace=True)]
        self.body = nn.Sequential(*body)
        self.head = nn.Conv2d(channels, 4, 3, padding=1)
        self.channels = channels
        self.layers = layers

    def forward(self, x):
        # channel-max prior appended as a fourth input channel
        x = torch.cat([x.max(dim=1, keepdim=True)[0], x], dim=1)
        out = torch.sigmoid(self.head(self.body(x)))
        return out[:, :3], out[:, 3:4]


def save_decomposition_weights(net, path):
    torch.save(
        {
            "format": WEIGHTS_FORMAT,
            "version": WEIGHTS_VERSION,
            "config": {"channels": net.channels, "layers": net.layers},
            "state_dict": net.state_dict(),
        },
        path,
    )


def load_decomposition_weights(path):
    if not os.path.isfile(path):
        raise ConfigError(f"decomposition weights not found: {path}")
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read decomposition weights {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != WEIGHTS_FORMAT:
        raise CheckpointError(f"{path} is not a decomposition weights file")
    if blob.get("version") != WEIGHTS_VERSION:
        raise CheckpointError(f"{path}: unsupported weights version {blob.get('version')}")
    net = DecompositionNet(**blob["config"])
    net.load_state_dict(blob["state_dict"])
    return net


class IlluminationEstimator(nn.Module):
    def __init__(self, backend="luminance_fallback", decomposition=None, weights_path=None,
                 quantizer_init=(4.0, -2.0)):
        super().__init__()
        if backend not in BACKENDS:
            raise ConfigError(f"unknown illumination backend {backend!r}; expected one of {BACKENDS}")
        if backend == "retinex_pretrained":
            if decomposition is None and weights_path:
                decomposition = load_decomposition_weights(weights_path)
            if decomposition is None:
                raise ConfigError("backend 'retinex_pretrained' selected but no decomposition weights supplied")
            for p in decomposition.parameters():
                p.requires_grad_(False)
            decomposition.eval()
        self.backend = backend
        self.decomposition = decomposition
        self.quantizer = nn.Linear(1, 1)
        with torch.no_grad():
            self.quantizer.weight.fill_(quantizer_init[0])
            self.quantizer.bias.fill_(quantizer_init[1])

    def train(self, mode=True):
        super().train(mode)
        if self.decomposition is not None:
            self.decomposition.eval()
        return self

    def illuminance_map(self, rgb):
        return decompose_illuminance(rgb, self)

    def forward(self, rgb):
        g = self.illuminance_map(rgb)
        return IlluminanceScore(quantize_illuminance(g, self.quantizer), g)


def decompose_illuminance(rgb, estimator):
    """Nonnegative single-channel illuminance map ``(B, 1, H, W)`` of an RGB batch."""
    if rgb.dim() == 3:
        rgb = rgb.unsqueeze(0)
    with torch.no_grad():
        if estimator.backend == "luminance_fallback":
            return rgb.max(dim=1, keepdim=True)[0].clamp_min(0.0)
        _, illum = estimator.decomposition(rgb)
        return illum.clamp_min(0.0)


def quantize_illuminance(illum_map, quantizer):
    """``alpha = sigmoid(FC(flatten(GAP(map))))``, one value per sample."""
    if illum_map.dim() == 3:
        illum_map = illum_map.unsqueeze(0)
    pooled = illum_map.mean(dim=(2, 3))  # GAP + flatten -> (B, C)
    alpha = torch.sigmoid(quantizer(pooled)).squeeze(1)
    return alpha.clamp(ALPHA_EPS, 1.0 - ALPHA_EPS)
