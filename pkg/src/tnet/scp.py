"""Semantic constraint provider.

A single-channel mask predicted from the top RGB level is injected into every
thermal level as ``E + alpha * up(M) * E``.
"""
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeError


@dataclass
class SemanticMask:
    mask: torch.Tensor  # (B, 1, h5, w5), values in (0, 1)
    logits: torch.Tensor


def as_gate(alpha, ref):
    """Broadcastable ``(B, 1, 1, 1)`` view of a scalar or per-sample gate."""
    a = torch.as_tensor(alpha, dtype=ref.dtype, device=ref.device)
    if a.dim() == 0:
        return a
    return a.view(-1, 1, 1, 1)


def upsample(x, size):
    if tuple(x.shape[-2:]) == tuple(size):
        return x
    return F.interpolate(x, size=tuple(size), mode="bilinear", align_corners=False)


def generate_semantic_mask(e_r5, head):
    logits = head(e_r5)
    return SemanticMask(torch.sigmoid(logits), logits)


def embed_semantics(e_t, mask, alpha, level):
    """Semantic-embedded thermal features for pyramid ``level`` (1..5)."""
    m = mask.mask if isinstance(mask, SemanticMask) else mask
    if level != 5:
        m = upsample(m, e_t.shape[-2:])
    if m.shape[-2:] != e_t.shape[-2:]:
        raise ShapeError(f"level {level}: mask size {tuple(m.shape[-2:])} != features {tuple(e_t.shape[-2:])}")
    return e_t + as_gate(alpha, e_t) * m * e_t


class SemanticConstraintProvider(nn.Module):
    """Mask head plus the per-level projections of the concatenation variant."""

    def __init__(self, rgb_top_channels, thermal_channels):
        super().__init__()
        self.head = nn.Conv2d(rgb_top_channels, 1, 1)
        self.concat_proj = nn.ModuleList(nn.Conv2d(c + 1, c, 1) for c in thermal_channels)

    def mask(self, e_r5):
        return generate_semantic_mask(e_r5, self.head)

    def forward(self, e_r5, thermal_levels, alpha, concat=False):
        """Return ``(embedded thermal levels, SemanticMask)``.

        With ``concat`` the upsampled mask is concatenated to each level and
        projected back by a 1x1 conv instead of the gated residual product.
        """
        mask = self.mask(e_r5)
        out = []
        for i, e_t in enumerate(thermal_levels, start=1):
            if concat:
                m = upsample(mask.mask, e_t.shape[-2:])
                out.append(self.concat_proj[i - 1](torch.cat([e_t, m], dim=1)))
            else:
                out.append(embed_semantics(e_t, mask, alpha, i))
        return out, mask
