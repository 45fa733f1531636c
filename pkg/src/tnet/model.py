"""TNet assembly: illumination gate, two encoders, SCP, LC decoder."""
from dataclasses import dataclass

import torch
import torch.nn as nn

from .decoder import AblationToggles, LCDecoder
from .encoder import BackboneConfig, FeaturePyramid, build_backbone, check_input_size
from .errors import ShapeError
from .illumination import IlluminationEstimator
from .scp import SemanticConstraintProvider


@dataclass
class TNetOutput:
    alpha: torch.Tensor  # (B,)
    illuminance: torch.Tensor  # (B, 1, H', W')
    rgb: FeaturePyramid
    thermal: FeaturePyramid
    thermal_embedded: list
    mask: object  # SemanticMask, or None when SCP is disabled
    state: object  # DecoderState

    @property
    def final(self):
        return self.state.final


class TNet(nn.Module):
    def __init__(self, backbone=None, decoder_width=64, toggles=None, illumination=None):
        super().__init__()
        backbone = backbone or BackboneConfig()
        self.backbone_config = backbone
        self.toggles = toggles or AblationToggles()
        self.rgb_encoder = build_backbone(backbone)
        self.thermal_encoder = build_backbone(backbone)
        channels = self.rgb_encoder.channels
        self.gie = illumination if illumination is not None else IlluminationEstimator()
        # every optional subpath is built so any toggle set can run on any checkpoint
        self.scp = SemanticConstraintProvider(channels[4], channels)
        self.decoder = LCDecoder(channels, channels, width=decoder_width)

    def forward(self, rgb, thermal, toggles=None):
        t = toggles or self.toggles
        if rgb.shape != thermal.shape:
            raise ShapeError(f"rgb {tuple(rgb.shape)} and thermal {tuple(thermal.shape)} differ")
        check_input_size(rgb.shape[-2], rgb.shape[-1])

        score = self.gie(rgb)
        alpha = score.alpha
        e_r = FeaturePyramid(self.rgb_encoder(rgb), "rgb")
        e_t = FeaturePyramid(self.thermal_encoder(thermal), "thermal")

        if t.use_scp:
            gate = alpha if t.use_gie else 1.0
            embedded, mask = self.scp(e_r[4], e_t.levels, gate, concat=t.scp_concat_variant)
        else:
            embedded, mask = list(e_t.levels), None

        state = self.decoder(e_r.levels, embedded, alpha, t, rgb.shape[-2:])
        return TNetOutput(alpha, score.map, e_r, e_t, embedded, mask, state)

    def active_parameter_names(self, toggles=None):
        """Names of trainable parameters on the path enabled by ``toggles``."""
        t = toggles or self.toggles
        names = []
        for name, p in self.named_parameters():
            if not p.requires_grad:
                continue
            if name.startswith("gie.") and not t.use_gie:
                continue
            if name.startswith("scp.head") and not t.use_scp:
                continue
            if name.startswith("scp.concat_proj") and not t.scp_concat_variant:
                continue
            if name.startswith("decoder.sa.") and not t.use_localization:
                continue
            if name.startswith(("decoder.rgb_adapt", "decoder.thermal_adapt", "decoder.ca.", "decoder.fuse.")) \
                    and not t.use_complementation:
                continue
            names.append(name)
        return names
