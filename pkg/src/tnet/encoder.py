"""Five-level feature pyramids for the RGB and thermal streams (strides 2..32)."""
import os
import warnings
from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import CheckpointError, ConfigError, ShapeError

VARIANTS = ("tiny", "resnet50")
TINY_CHANNELS = (16, 24, 32, 48, 64)
RESNET50_CHANNELS = (64, 256, 512, 1024, 2048)
STRIDES = (2, 4, 8, 16, 32)
WEIGHTS_FORMAT = "tnet.backbone"
WEIGHTS_VERSION = 1
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class BackboneConfig:
    variant: str = "tiny"
    pretrained: bool = False
    channels: tuple = ()
    weights_path: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown backbone variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.channels:
            default = TINY_CHANNELS if self.variant == "tiny" else RESNET50_CHANNELS
            object.__setattr__(self, "channels", default)
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if len(self.channels) != 5:
            raise ConfigError(f"backbone needs 5 per-level channel counts, got {self.channels}")
        if self.variant == "tiny" and max(self.channels) > 64:
            raise ConfigError(f"tiny backbone channels must be <= 64, got {self.channels}")
        if self.variant == "resnet50" and self.channels != RESNET50_CHANNELS:
            raise ConfigError(f"resnet50 channels are fixed to {RESNET50_CHANNELS}")


@dataclass
class FeaturePyramid:
    levels: list
    modality: str

    def __getitem__(self, i):
        return self.levels[i]

    def __len__(self):
        return len(self.levels)

    @property
    def sizes(self):
        return [tuple(t.shape[-2:]) for t in self.levels]


def check_input_size(height, width, multiple=32):
    for name, value in (("height", height), ("width", width)):
        if value % multiple:
            raise ShapeError(f"input {name} {value} is not divisible by {multiple}")


def _conv_bn_relu(cin, cout, stride=1):
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class TinyBackbone(nn.Module):
    """Five stride-2 stages of two 3x3 conv/BN/ReLU layers each."""

    def __init__(self, channels=TINY_CHANNELS):
        super().__init__()
        stages, cin = [], 3
        for cout in channels:
            stages.append(nn.Sequential(_conv_bn_relu(cin, cout, stride=2), _conv_bn_relu(cout, cout)))
            cin = cout
        self.stages = nn.ModuleList(stages)
        self.channels = tuple(channels)

    def forward(self, x):
        levels = []
        for stage in self.stages:
            x = stage(x)
            levels.append(x)
        return levels


class ResNet50Backbone(nn.Module):
    """ResNet-50 without the final pooling and FC; the stride-2 stem is level 1."""

    channels = RESNET50_CHANNELS

    def __init__(self, pretrained=False, weights_path=""):
        super().__init__()
        from torchvision.models import resnet50

        net = resnet50(weights=None)
        if pretrained:
            if weights_path and os.path.isfile(weights_path):
                net.load_state_dict(load_backbone_weights(weights_path))
            else:
                warnings.warn(
                    f"resnet50 weights not found at {weights_path!r}; using random initialisation",
                    RuntimeWarning,
                )
                pretrained = False
        self.pretrained = pretrained
        self.stem = nn.Sequential(net.conv1, net.bn1, net.relu)
        self.pool = net.maxpool
        self.layer1, self.layer2, self.layer3, self.layer4 = net.layer1, net.layer2, net.layer3, net.layer4
        self.register_buffer("mean", torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1), persistent=False)
        self.register_buffer("std", torch.tensor(IMAGENET_STD).view(1, 3, 1, 1), persistent=False)

    def forward(self, x):
        x = (x - self.mean) / self.std
        e1 = self.stem(x)
        e2 = self.layer1(self.pool(e1))
        e3 = self.layer2(e2)
        e4 = self.layer3(e3)
        e5 = self.layer4(e4)
        return [e1, e2, e3, e4, e5]


def save_backbone_weights(state_dict, path):
    torch.save({"format": WEIGHTS_FORMAT, "version": WEIGHTS_VERSION, "state_dict": state_dict}, path)


def load_backbone_weights(path):
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read backbone weights {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != WEIGHTS_FORMAT:
        raise CheckpointError(f"{path} is not a backbone weights file")
    if blob.get("version") != WEIGHTS_VERSION:
        raise CheckpointError(f"{path}: unsupported backbone weights version {blob.get('version')}")
    return blob["state_dict"]


def build_backbone(config):
    if config.variant == "tiny":
        return TinyBackbone(config.channels)
    return ResNet50Backbone(config.pretrained, config.weights_path)


def extract_features(image, backbone, modality="rgb"):
    """Run ``backbone`` on a ``(B, 3, H, W)`` batch and return its pyramid."""
    if image.dim() == 3:
        image = image.unsqueeze(0)
    check_input_size(image.shape[-2], image.shape[-1])
    return FeaturePyramid(list(backbone(image)), modality)
