"""RGB-T sample triples: loading, augmentation, synthetic scenes.

Images are ``H x W x C`` float arrays in [0, 1]; ground truth is an
``H x W`` float array holding only 0 and 1.
"""
import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image
from scipy import ndimage

from .errors import ConfigError, DataError, ShapeError

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
RGB_DIR, THERMAL_DIR, GT_DIR = "RGB", "T", "GT"
GT_THRESHOLD = 0.5


@dataclass
class RgbtSample:
    rgb: np.ndarray
    thermal: np.ndarray
    gt: np.ndarray
    id: str = ""

    def __post_init__(self):
        self.validate()

    @property
    def size(self):
        return self.gt.shape

    def validate(self):
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ShapeError(f"{self.id}: rgb must be HxWx3, got {self.rgb.shape}")
        if self.thermal.ndim != 3 or self.thermal.shape[2] != 3:
            raise ShapeError(f"{self.id}: thermal must be HxWx3, got {self.thermal.shape}")
        if self.gt.ndim != 2:
            raise ShapeError(f"{self.id}: gt must be HxW, got {self.gt.shape}")
        if not (self.rgb.shape[:2] == self.thermal.shape[:2] == self.gt.shape):
            raise ShapeError(
                f"{self.id}: size mismatch rgb {self.rgb.shape[:2]}, "
                f"thermal {self.thermal.shape[:2]}, gt {self.gt.shape}"
            )
        for name in ("rgb", "thermal", "gt"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
                raise DataError(f"{self.id}: {name} values must be finite and in [0, 1]")
        if not np.all((self.gt == 0) | (self.gt == 1)):
            raise DataError(f"{self.id}: gt must be binary")

    def to_tensors(self):
        """``(rgb, thermal, gt)`` as CHW float32 tensors (gt is 1xHxW)."""
        rgb = torch.from_numpy(np.ascontiguousarray(self.rgb.transpose(2, 0, 1))).float()
        thermal = torch.from_numpy(np.ascontiguousarray(self.thermal.transpose(2, 0, 1))).float()
        gt = torch.from_numpy(np.ascontiguousarray(self.gt[None])).float()
        return rgb, thermal, gt


# -- loading --------------------------------------------------------------------

def read_image(path, channels=3):
    """Load an 8-bit image as float in [0, 1] (HxWx3, or HxW when ``channels == 1``)."""
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L") if channels == 1 else img.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    return arr.astype(np.float64) / 255.0


def read_thermal(path):
    try:
        with Image.open(path) as img:
            mode = img.mode
            arr = np.asarray(img.convert("L") if mode in ("L", "I", "I;16", "F", "1") else img.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc
    arr = arr.astype(np.float64) / 255.0
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return arr


def read_gt(path):
    return (read_image(path, channels=1) > GT_THRESHOLD).astype(np.float64)


def _index(folder):
    if not os.path.isdir(folder):
        raise DataError(f"missing folder {folder}")
    out = {}
    for name in sorted(os.listdir(folder)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in IMAGE_EXTS:
            out[stem] = os.path.join(folder, name)
    return out


def resolve_split(root_path, split):
    """``root/<split>`` (any case) when it exists, else ``root`` itself."""
    if split not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    if os.path.isdir(root_path):
        for name in os.listdir(root_path):
            if name.lower() == split and os.path.isdir(os.path.join(root_path, name)):
                return os.path.join(root_path, name)
    return root_path


def load_dataset(root_path, split="train"):
    """Load every RGB/T/GT triple under ``root_path``, sorted by id."""
    root = resolve_split(root_path, split)
    rgb_files = _index(os.path.join(root, RGB_DIR))
    t_files = _index(os.path.join(root, THERMAL_DIR))
    gt_files = _index(os.path.join(root, GT_DIR))
    ids = set(rgb_files) | set(t_files) | set(gt_files)
    orphans = sorted(i for i in ids if not (i in rgb_files and i in t_files and i in gt_files))
    if orphans:
        raise DataError(f"incomplete triples (missing counterpart files): {', '.join(orphans)}")
    if not ids:
        raise DataError(f"no samples found under {root}")

    samples = []
    for sid in sorted(ids):
        rgb = read_image(rgb_files[sid])
        thermal = read_thermal(t_files[sid])
        gt = read_gt(gt_files[sid])
        if not (rgb.shape[:2] == thermal.shape[:2] == gt.shape):
            raise ShapeError(
                f"{sid}: size mismatch rgb {rgb.shape[:2]}, thermal {thermal.shape[:2]}, gt {gt.shape}"
            )
        samples.append(RgbtSample(rgb, thermal, gt, sid))
    return samples


def write_dataset(samples, root_path):
    """Write samples in the ``RGB/``, ``T/``, ``GT/`` layout as 8-bit PNGs."""
    for sub in (RGB_DIR, THERMAL_DIR, GT_DIR):
        os.makedirs(os.path.join(root_path, sub), exist_ok=True)
    for s in samples:
        Image.fromarray(to_uint8(s.rgb)).save(os.path.join(root_path, RGB_DIR, f"{s.id}.png"))
        Image.fromarray(to_uint8(s.thermal[:, :, 0])).save(os.path.join(root_path, THERMAL_DIR, f"{s.id}.png"))
        Image.fromarray(to_uint8(s.gt)).save(os.path.join(root_path, GT_DIR, f"{s.id}.png"))


def to_uint8(arr):
    return np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)


# -- augmentation -----------------------------------------------------------------

@dataclass(frozen=True)
class AugmentationPolicy:
    flip_prob: float = 0.5
    rotation_prob: float = 0.5
    rotation_degrees: tuple = (-15.0, 15.0)
    crop_prob: float = 0.5
    crop_fraction: float = 0.1
    noise_prob: float = 0.5
    noise_std: float = 0.02
    scales: tuple = (352,)
    seed: int = 0

    def __post_init__(self):
        deg = self.rotation_degrees
        if np.isscalar(deg):
            deg = (-abs(float(deg)), abs(float(deg)))
        deg = tuple(float(d) for d in deg)
        object.__setattr__(self, "rotation_degrees", deg)
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))
        for name in ("flip_prob", "rotation_prob", "crop_prob", "noise_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if len(deg) != 2 or deg[0] > deg[1] or max(abs(deg[0]), abs(deg[1])) > 180:
            raise ConfigError(f"rotation_degrees must be an ordered range within [-180, 180], got {deg}")
        if not 0.0 <= self.crop_fraction <= 0.3:
            raise ConfigError(f"crop_fraction must be in [0, 0.3], got {self.crop_fraction}")
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if not self.scales or min(self.scales) <= 0:
            raise ConfigError(f"scales must be a nonempty list of positive sizes, got {self.scales}")

    @classmethod
    def identity(cls, size, seed=0):
        return cls(0.0, 0.0, (0.0, 0.0), 0.0, 0.0, 0.0, 0.0, (size,), seed)


def resize_stack(stack, size):
    """Bilinear resize of an ``H x W x C`` array to ``size`` (square int or (h, w))."""
    h, w = (size, size) if np.isscalar(size) else size
    if stack.shape[:2] == (h, w):
        return stack
    # channels ride in the batch axis so each one takes the identical arithmetic path
    t = torch.from_numpy(np.ascontiguousarray(stack.transpose(2, 0, 1)))[:, None].double()
    t = F.interpolate(t, size=(h, w), mode="bilinear", align_corners=False)
    return t[:, 0].numpy().transpose(1, 2, 0)


def rotate_stack(stack, degrees):
    """Rotate counter-clockwise (as displayed) about the image centre; edges replicated."""
    return ndimage.rotate(stack, degrees, axes=(1, 0), reshape=False, order=1, mode="nearest")


def augment(sample, policy, draw, scale=None):
    """Randomly flip, rotate, clip borders, add noise and rescale one triple.

    All geometric steps act on a single stacked array so rgb, thermal and gt
    share the exact same transform. ``draw`` is a ``numpy.random.Generator``;
    ``scale`` overrides the size drawn from ``policy.scales``.
    """
    stack = np.concatenate([sample.rgb, sample.thermal, sample.gt[:, :, None]], axis=2)

    if draw.random() < policy.flip_prob:
        stack = stack[:, ::-1, :]
    if draw.random() < policy.rotation_prob:
        lo, hi = policy.rotation_degrees
        angle = draw.uniform(lo, hi)
        if angle != 0.0:
            stack = rotate_stack(stack, angle)
    if draw.random() < policy.crop_prob and policy.crop_fraction > 0:
        h, w = stack.shape[:2]
        top, bottom, left, right = draw.uniform(0.0, policy.crop_fraction, size=4)
        r0, r1 = int(top * h), h - int(bottom * h)
        c0, c1 = int(left * w), w - int(right * w)
        stack = stack[r0:r1, c0:c1, :]
    if scale is None:
        scale = policy.scales[draw.integers(len(policy.scales))]
    stack = resize_stack(np.ascontiguousarray(stack), scale)

    rgb = stack[:, :, 0:3]
    thermal = stack[:, :, 3:6]
    gt = (stack[:, :, 6] >= GT_THRESHOLD).astype(np.float64)
    if draw.random() < policy.noise_prob and policy.noise_std > 0:
        rgb = np.clip(rgb + draw.normal(0.0, policy.noise_std, rgb.shape), 0.0, 1.0)
        thermal = np.clip(thermal + draw.normal(0.0, policy.noise_std, thermal.shape), 0.0, 1.0)
    return RgbtSample(
        np.ascontiguousarray(np.clip(rgb, 0.0, 1.0)),
        np.ascontiguousarray(np.clip(thermal, 0.0, 1.0)),
        np.ascontiguousarray(gt),
        sample.id,
    )


def sample_rng(seed, epoch, index):
    """Generator keyed on (seed, epoch, index): reproducible regardless of worker layout."""
    return np.random.default_rng([int(seed), int(epoch), int(index)])


# -- synthetic scenes ---------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSceneSpec:
    canvas_size: int = 64
    n_objects: int = 1
    brightness: float = 1.0
    thermal_contrast: float = 0.5
    decoy_heat: bool = False
    seed: int = 0
    id: str = field(default="", compare=False)

    def __post_init__(self):
        if self.canvas_size < 8:
            raise ConfigError(f"canvas_size must be >= 8, got {self.canvas_size}")
        if not 0.0 <= self.brightness <= 1.0:
            raise ConfigError(f"brightness must be in [0, 1], got {self.brightness}")
        if not -1.0 <= self.thermal_contrast <= 1.0:
            raise ConfigError(f"thermal_contrast must be in [-1, 1], got {self.thermal_contrast}")


THERMAL_BACKGROUND = 0.3
THERMAL_TEXTURE = 0.08
DECOY_HEAT = 0.6


def _smooth_field(rng, size, amplitude):
    """Low-frequency field with values in [-amplitude, amplitude]."""
    coarse = rng.uniform(-1.0, 1.0, size=(4, 4))
    field_ = ndimage.zoom(coarse, size / 4.0, order=1, mode="nearest")[:size, :size]
    return amplitude * np.clip(field_, -1.0, 1.0)


def _shape_mask(rng, size):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = rng.uniform(0.25 * size, 0.75 * size, size=2)
    ry, rx = rng.uniform(0.1 * size, 0.22 * size, size=2)
    if rng.random() < 0.5:
        return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    return (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)


def _decoy_mask(rng, size, gt):
    """Square hot patch kept at least two pixels clear of the foreground."""
    keep_out = ndimage.binary_dilation(gt, iterations=2)
    side = max(2, size // 8)
    for _ in range(200):
        r, c = rng.integers(0, size - side, size=2)
        if not keep_out[r:r + side, c:c + side].any():
            mask = np.zeros_like(gt)
            mask[r:r + side, c:c + side] = True
            return mask
    # fall back to scanning for any free window
    for r in range(0, size - side):
        for c in range(0, size - side):
            if not keep_out[r:r + side, c:c + side].any():
                mask = np.zeros_like(gt)
                mask[r:r + side, c:c + side] = True
                return mask
    raise DataError("no room for a decoy region disjoint from the foreground")


def synthesize_scene(spec):
    """Render a deterministic RGB-T scene from ``spec``.

    The RGB image is a [0, 1] base rendering scaled by ``spec.brightness``; the
    thermal image has a flat-ish background with objects offset by
    ``spec.thermal_contrast``. With ``decoy_heat`` a hot patch that is not part
    of the ground truth is added to the thermal image.
    """
    if spec.n_objects <= 0:
        raise DataError("n_objects must be >= 1: empty ground truth is not allowed for training scenes")
    rng = np.random.default_rng(spec.seed)
    size = spec.canvas_size

    gt = np.zeros((size, size), dtype=bool)
    for _ in range(spec.n_objects):
        gt |= _shape_mask(rng, size)

    bg_color = rng.uniform(0.2, 0.6, size=3)
    fg_color = rng.uniform(0.2, 0.6, size=3)
    fg_color[rng.integers(3)] = rng.uniform(0.85, 1.0)
    base = np.empty((size, size, 3))
    base[:] = bg_color
    base += _smooth_field(rng, size, 0.1)[:, :, None]
    base[gt] = fg_color
    base += rng.normal(0.0, 0.02, size=base.shape)
    rgb = spec.brightness * np.clip(base, 0.0, 1.0)

    thermal = THERMAL_BACKGROUND + _smooth_field(rng, size, THERMAL_TEXTURE)
    thermal[gt] = THERMAL_BACKGROUND + spec.thermal_contrast
    if spec.decoy_heat:
        thermal[_decoy_mask(rng, size, gt)] = THERMAL_BACKGROUND + DECOY_HEAT
    thermal = np.repeat(np.clip(thermal, 0.0, 1.0)[:, :, None], 3, axis=2)

    return RgbtSample(rgb, thermal, gt.astype(np.float64), spec.id or f"synth_{spec.seed:05d}")


def synthetic_dataset(n, canvas_size=64, seed=0, brightness_range=(0.05, 1.0),
                      decoy_prob=0.3, max_objects=2):
    """``n`` synthetic scenes with per-scene brightness, contrast and decoys drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        spec = SyntheticSceneSpec(
            canvas_size=canvas_size,
            n_objects=int(rng.integers(1, max_objects + 1)),
            brightness=float(rng.uniform(*brightness_range)),
            thermal_contrast=float(rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 0.5)),
            decoy_heat=bool(rng.random() < decoy_prob),
            seed=int(rng.integers(2**31)),
            id=f"synth_{seed}_{i:05d}",
        )
        out.append(synthesize_scene(spec))
    return out
