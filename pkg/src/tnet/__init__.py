"""Illumination-gated two-stream RGB-thermal salient object detection."""
from .data import AugmentationPolicy, RgbtSample, SyntheticSceneSpec, augment, load_dataset, synthesize_scene
from .decoder import ABLATIONS, AblationToggles, DecoderState
from .encoder import BackboneConfig, FeaturePyramid, extract_features
from .errors import CheckpointError, ConfigError, DataError, ShapeError, TNetError
from .illumination import IlluminanceScore, IlluminationEstimator
from .loss import LossReport, bce_loss, iou_loss, total_loss
from .model import TNet, TNetOutput

__version__ = "0.1.0"

__all__ = [
    "ABLATIONS",
    "AblationToggles",
    "AugmentationPolicy",
    "BackboneConfig",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "DecoderState",
    "FeaturePyramid",
    "IlluminanceScore",
    "IlluminationEstimator",
    "LossReport",
    "RgbtSample",
    "ShapeError",
    "SyntheticSceneSpec",
    "TNet",
    "TNetError",
    "TNetOutput",
    "augment",
    "bce_loss",
    "extract_features",
    "iou_loss",
    "load_dataset",
    "synthesize_scene",
    "total_loss",
]
