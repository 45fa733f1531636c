"""Run configuration: a flat ``key = value`` text format with CLI overrides."""
import dataclasses
from dataclasses import dataclass, fields

from .data import AugmentationPolicy
from .decoder import ABLATIONS, AblationToggles
from .encoder import VARIANTS, BackboneConfig
from .errors import ConfigError
from .illumination import BACKENDS

TOGGLE_FIELDS = tuple(f.name for f in fields(AblationToggles))


@dataclass
class RunConfig:
    # model
    backbone: str = "resnet50"
    pretrained: bool = True
    backbone_weights: str = ""
    decoder_width: int = 64
    illumination_backend: str = "luminance_fallback"
    illumination_weights: str = ""
    quantizer_init_weight: float = 4.0
    quantizer_init_bias: float = -2.0
    # ablation toggles (``ablation`` names a preset and overrides the six flags)
    ablation: str = ""
    use_gie: bool = True
    use_scp: bool = True
    use_localization: bool = True
    use_complementation: bool = True
    scp_concat_variant: bool = False
    skip_direct_addition: bool = False
    # optimisation
    input_size: int = 352
    epochs: int = 100
    batch_size: int = 16
    lr: float = 1e-4
    lr_decay_every: int = 45
    lr_decay_factor: float = 0.1
    phase_switch_fraction: float = 0.3
    iou_eps: float = 1.0
    max_steps: int = 0
    seed: int = 0
    # augmentation
    augment: bool = True
    flip_prob: float = 0.5
    rotation_prob: float = 0.5
    rotation_degrees: float = 15.0
    crop_prob: float = 0.5
    crop_fraction: float = 0.1
    noise_prob: float = 0.5
    noise_std: float = 0.02
    scales: str = ""
    # data and outputs
    data_root: str = ""
    val_root: str = ""
    synthetic_train: int = 0
    synthetic_val: int = 0
    synthetic_seed: int = 0
    out_dir: str = "runs/default"
    val_every: int = 5
    checkpoint_every: int = 5
    resume: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.backbone not in VARIANTS:
            raise ConfigError(f"backbone={self.backbone!r} not in {VARIANTS}")
        if self.illumination_backend not in BACKENDS:
            raise ConfigError(f"illumination_backend={self.illumination_backend!r} not in {BACKENDS}")
        if self.input_size <= 0 or self.input_size % 32:
            raise ConfigError(f"input_size={self.input_size} must be a positive multiple of 32")
        for name in ("epochs", "batch_size", "decoder_width", "val_every", "checkpoint_every"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}={getattr(self, name)} must be positive")
        for name in ("max_steps", "lr_decay_every", "synthetic_train", "synthetic_val"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}={getattr(self, name)} must be >= 0")
        if self.lr <= 0:
            raise ConfigError(f"lr={self.lr} must be positive")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ConfigError(f"lr_decay_factor={self.lr_decay_factor} must be in (0, 1]")
        if not 0.0 <= self.phase_switch_fraction <= 1.0:
            raise ConfigError(f"phase_switch_fraction={self.phase_switch_fraction} must be in [0, 1]")
        if self.iou_eps <= 0:
            raise ConfigError(f"iou_eps={self.iou_eps} must be positive")
        if self.ablation and self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation={self.ablation!r} not in {sorted(ABLATIONS)}")
        for s in self.scale_list():
            if s % 32:
                raise ConfigError(f"scale {s} must be a multiple of 32")
        self.toggles()
        self.augmentation_policy()

    # -- derived objects ---------------------------------------------------------

    def toggles(self):
        if self.ablation:
            return ABLATIONS[self.ablation]
        return AblationToggles(**{k: getattr(self, k) for k in TOGGLE_FIELDS})

    def backbone_config(self):
        return BackboneConfig(self.backbone, self.pretrained, (), self.backbone_weights)

    def scale_list(self):
        if not self.scales.strip():
            return [self.input_size]
        try:
            return [int(s) for s in self.scales.replace(";", ",").split(",") if s.strip()]
        except ValueError as exc:
            raise ConfigError(f"scales={self.scales!r}: {exc}") from exc

    def augmentation_policy(self):
        return AugmentationPolicy(
            flip_prob=self.flip_prob, rotation_prob=self.rotation_prob,
            rotation_degrees=self.rotation_degrees, crop_prob=self.crop_prob,
            crop_fraction=self.crop_fraction, noise_prob=self.noise_prob,
            noise_std=self.noise_std, scales=tuple(self.scale_list()), seed=self.seed,
        )

    # -- serialisation -------------------------------------------------------------

    def as_dict(self):
        return dataclasses.asdict(self)

    def to_text(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.as_dict().items())

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def from_dict(cls, values):
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**{k: _coerce(known[k], v) for k, v in values.items()})

    @classmethod
    def load(cls, path, **overrides):
        values = parse_kv(path)
        values.update(overrides)
        return cls.from_dict(values)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(f, value):
    if not isinstance(value, str):
        return value
    kind = f.type if isinstance(f.type, type) else {"bool": bool, "int": int, "float": float, "str": str}[f.type]
    try:
        if kind is bool:
            low = value.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        return kind(value.strip())
    except ValueError as exc:
        raise ConfigError(f"{f.name}: {exc}") from exc


def parse_kv(path):
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip()] = value.strip()
    return values
