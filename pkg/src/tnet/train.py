"""Seeded training loop, inference helpers and checkpoint persistence."""
import json
import logging
import math
import os
import random

import numpy as np
import torch
import torch.nn.functional as F

from .config import RunConfig
from .data import RgbtSample, augment, load_dataset, resize_stack, sample_rng, synthetic_dataset
from .errors import CheckpointError, ConfigError
from .illumination import IlluminationEstimator
from .loss import total_loss, phase_for_epoch
from .metrics import evaluate_dataset
from .model import TNet

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "tnet.checkpoint"
CHECKPOINT_VERSION = 1
OUTPUT_ROOT_ENV = "TNET_OUTPUT_ROOT"


def set_seed(seed):
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def resolve_out_dir(path):
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not os.path.isabs(path):
        return os.path.join(root, path)
    return path


def build_model(config):
    estimator = IlluminationEstimator(
        config.illumination_backend,
        weights_path=config.illumination_weights or None,
        quantizer_init=(config.quantizer_init_weight, config.quantizer_init_bias),
    )
    return TNet(config.backbone_config(), config.decoder_width, config.toggles(), estimator)


# -- batches -----------------------------------------------------------------------

def _stack(samples):
    rgb, thermal, gt = zip(*(s.to_tensors() for s in samples))
    return torch.stack(rgb), torch.stack(thermal), torch.stack(gt)


def _resized(sample, size):
    stack = np.concatenate([sample.rgb, sample.thermal, sample.gt[:, :, None]], axis=2)
    stack = resize_stack(stack, size)
    return RgbtSample(
        np.clip(stack[:, :, :3], 0, 1), np.clip(stack[:, :, 3:6], 0, 1),
        (stack[:, :, 6] >= 0.5).astype(np.float64), sample.id,
    )


def epoch_batches(samples, config, epoch):
    """Yield ``(rgb, thermal, gt)`` batches for one epoch, fully determined by the seed."""
    policy = config.augmentation_policy()
    order = np.random.default_rng([config.seed, epoch, 0]).permutation(len(samples))
    n_batches = math.ceil(len(samples) / config.batch_size)
    for b in range(n_batches):
        idx = order[b * config.batch_size:(b + 1) * config.batch_size]
        scales = policy.scales
        scale = scales[np.random.default_rng([config.seed, epoch, 1, b]).integers(len(scales))]
        if config.augment:
            batch = [augment(samples[i], policy, sample_rng(config.seed, epoch, i), scale=scale) for i in idx]
        else:
            batch = [_resized(samples[i], scale) for i in idx]
        yield _stack(batch)


def _load_split(config, root, n_synth, seed_offset, split):
    if root:
        return load_dataset(root, split)
    if n_synth:
        return synthetic_dataset(n_synth, canvas_size=config.input_size, seed=config.synthetic_seed + seed_offset)
    return []


# -- inference -----------------------------------------------------------------------

@torch.no_grad()
def predict_sample(model, sample, input_size, toggles=None):
    """Saliency map at the sample's own resolution, plus the gate value alpha."""
    model.eval()
    small = _resized(sample, input_size) if sample.gt.shape != (input_size, input_size) else sample
    rgb, thermal, _ = _stack([small])
    out = model(rgb, thermal, toggles)
    logits = F.interpolate(out.state.final_logits, size=sample.gt.shape, mode="bilinear", align_corners=False)
    return torch.sigmoid(logits)[0, 0].double().numpy(), float(out.alpha[0])


def evaluate_model(model, samples, input_size, toggles=None):
    preds = [predict_sample(model, s, input_size, toggles)[0] for s in samples]
    return evaluate_dataset(preds, [s.gt for s in samples]), preds


# -- checkpoints -----------------------------------------------------------------------

def save_checkpoint(path, model, optimizer, scheduler, epoch, step, config, metric_history, loss_history):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "model": model.state_dict(),
            "quantizer": model.gie.quantizer.state_dict(),
            "optimizer": optimizer.state_dict() if optimizer is not None else None,
            "scheduler": scheduler.state_dict() if scheduler is not None else None,
            "epoch": epoch,
            "step": step,
            "config": config.as_dict(),
            "metric_history": metric_history,
            "loss_history": loss_history,
        },
        path,
    )


def read_checkpoint(path):
    if not os.path.isfile(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        blob = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # corrupt or foreign file
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a tnet checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {blob.get('version')} incompatible with {CHECKPOINT_VERSION}"
        )
    return blob


def _restore(model, state, path):
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise CheckpointError(f"{path}: weights do not match the configured model: {exc}") from exc


def load_checkpoint(path):
    """Rebuild the model stored at ``path``; returns ``(model, config, blob)``."""
    blob = read_checkpoint(path)
    config = RunConfig.from_dict(blob["config"])
    model = build_model(config.replace(pretrained=False))
    _restore(model, blob["model"], path)
    model.eval()
    return model, config, blob


# -- training ---------------------------------------------------------------------------

def train(config, log=None):
    """Run the two-phase schedule described by ``config``.

    Returns ``(model, history)`` where history holds the per-step loss totals,
    per-epoch loss reports and validation metrics.
    """
    log = log or logger.info
    train_set = _load_split(config, config.data_root, config.synthetic_train, 0, "train")
    if not train_set:
        raise ConfigError("no training data: set data_root or synthetic_train")
    val_set = _load_split(config, config.val_root, config.synthetic_val, 10_000, "test")
    if min(config.scale_list()) == 32 and (config.batch_size == 1 or len(train_set) % config.batch_size == 1):
        # the top level is 1x1 at this size, and batch norm cannot train on a single value
        raise ConfigError("input size 32 needs every training batch to hold at least 2 samples")

    set_seed(config.seed)
    model = build_model(config)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=config.lr)
    step_size = config.lr_decay_every or 10**9
    scheduler = torch.optim.lr_scheduler.StepLR(optimizer, step_size=step_size, gamma=config.lr_decay_factor)

    out_dir = resolve_out_dir(config.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    config.save(os.path.join(out_dir, "config.txt"))

    history = {"step_loss": [], "epochs": [], "metrics": []}
    start_epoch, step = 1, 0
    if config.resume:
        blob = read_checkpoint(config.resume)
        _restore(model, blob["model"], config.resume)
        optimizer.load_state_dict(blob["optimizer"])
        scheduler.load_state_dict(blob["scheduler"])
        start_epoch, step = blob["epoch"] + 1, blob["step"]
        history["metrics"] = list(blob["metric_history"])
        history["step_loss"] = list(blob["loss_history"])

    log_path = os.path.join(out_dir, "train_log.jsonl")
    with open(log_path, "a") as log_fh:
        for epoch in range(start_epoch, config.epochs + 1):
            phase = phase_for_epoch(epoch, config.epochs, config.phase_switch_fraction)
            model.train()
            lr = optimizer.param_groups[0]["lr"]
            sums, n_batches = {}, 0
            for rgb, thermal, gt in epoch_batches(train_set, config, epoch):
                out = model(rgb, thermal)
                report = total_loss(out.state, out.mask, gt, phase, config.iou_eps)
                optimizer.zero_grad(set_to_none=True)
                report.total.backward()
                optimizer.step()
                step += 1
                history["step_loss"].append(float(report.total.detach()))
                for k, v in report.as_dict().items():
                    sums[k] = sums.get(k, 0.0) + v
                n_batches += 1
                if config.max_steps and step >= config.max_steps:
                    break
            scheduler.step()
            entry = {"epoch": epoch, "phase": phase, "lr": lr, "step": step}
            entry.update({k: v / max(n_batches, 1) for k, v in sums.items()})
            if val_set and epoch % config.val_every == 0:
                rep, _ = evaluate_model(model, val_set, config.input_size)
                entry["val"] = rep.as_dict()
                history["metrics"].append({"epoch": epoch, **rep.as_dict()})
            history["epochs"].append(entry)
            log_fh.write(json.dumps(entry) + "\n")
            log_fh.flush()
            log(f"epoch {epoch} phase={phase} loss={entry.get('total', float('nan')):.4f}")
            done = bool(config.max_steps and step >= config.max_steps)
            if epoch % config.checkpoint_every == 0 or epoch == config.epochs or done:
                save_checkpoint(
                    os.path.join(out_dir, "last.pt"), model, optimizer, scheduler, epoch, step,
                    config, history["metrics"], history["step_loss"],
                )
            if done:
                break
    model.eval()
    history["checkpoint"] = os.path.join(out_dir, "last.pt")
    history["train_set"] = train_set
    return model, history
