"""Deep-supervised BCE + IoU objective with a two-phase schedule.

Every side output D^1..D^5 and the semantic mask is compared with the ground
truth after upsampling to GT resolution. IoU terms switch on once the
BCE-only warm-up phase ends.
"""
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .errors import ConfigError, ShapeError
from .scp import upsample

PHASES = ("bce_only", "bce_plus_iou")
IOU_EPS = 1.0


@dataclass
class LossReport:
    total: torch.Tensor
    per_term: dict = field(default_factory=dict)  # {(name, "bce"|"iou"): float}
    phase: str = "bce_plus_iou"

    @property
    def bce_total(self):
        return sum(v for (_, kind), v in self.per_term.items() if kind == "bce")

    @property
    def iou_total(self):
        return sum(v for (_, kind), v in self.per_term.items() if kind == "iou")

    def as_dict(self):
        out = {f"{name}_{kind}": v for (name, kind), v in self.per_term.items()}
        out["total"] = float(self.total.detach())
        return out


def _check(pred, gt):
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} vs ground truth {tuple(gt.shape)}")


def bce_loss(pred, gt, from_logits=False):
    """Mean binary cross-entropy; pass logits with ``from_logits=True`` for stability."""
    _check(pred, gt)
    if from_logits:
        return F.binary_cross_entropy_with_logits(pred, gt)
    return F.binary_cross_entropy(pred, gt)


def iou_loss(pred, gt, from_logits=False, eps=IOU_EPS):
    """Soft IoU loss ``1 - (sum pg + eps) / (sum(p + g - pg) + eps)``, averaged over the batch.

    Inputs of shape ``(B, ...)`` with ``B > 1`` and ``dim() == 4`` are reduced
    per sample; anything else is treated as one map.
    """
    _check(pred, gt)
    p = torch.sigmoid(pred) if from_logits else pred
    dims = tuple(range(1, p.dim())) if p.dim() == 4 else tuple(range(p.dim()))
    inter = (p * gt).sum(dim=dims)
    union = (p + gt - p * gt).sum(dim=dims)
    return (1.0 - (inter + eps) / (union + eps)).mean()


def total_loss(state, mask, gt, phase="bce_plus_iou", iou_eps=IOU_EPS):
    """Sum of per-term losses over the five side outputs and the semantic mask.

    ``mask`` may be ``None`` (semantic constraint disabled), in which case its
    two terms are dropped.
    """
    if phase not in PHASES:
        raise ConfigError(f"unknown loss phase {phase!r}; expected one of {PHASES}")
    size = gt.shape[-2:]
    preds = [(f"D{i}", logits) for i, logits in enumerate(state.side_outputs, start=1)]
    if mask is not None:
        preds.append(("M_r", mask.logits))

    per_term = {}
    total = gt.new_zeros(())
    for name, logits in preds:
        logits = upsample(logits, size)
        b = bce_loss(logits, gt, from_logits=True)
        per_term[(name, "bce")] = float(b.detach())
        total = total + b
        if phase == "bce_plus_iou":
            u = iou_loss(logits, gt, from_logits=True, eps=iou_eps)
            per_term[(name, "iou")] = float(u.detach())
            total = total + u
    return LossReport(total, per_term, phase)


def phase_for_epoch(epoch, total_epochs, fraction=0.3):
    """Loss phase for 1-based ``epoch``: BCE only for the first ``round(fraction * total)`` epochs."""
    switch = int(round(fraction * total_epochs))
    return "bce_only" if epoch <= switch else "bce_plus_iou"
