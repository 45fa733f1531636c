"""Per-image saliency measures: MAE, max F-measure, S-measure, E-measure."""
import numpy as np

from ..errors import DataError, ShapeError
from . import _kernels
from ._kernels import EPS

N_THRESHOLDS = 256
BETA2 = 0.3


def _prepare(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    if pred.ndim != 2:
        raise ShapeError(f"expected 2-D maps, got {pred.ndim}-D")
    pred = np.ascontiguousarray(np.clip(pred, 0.0, 1.0))
    gt = np.ascontiguousarray((gt > 0.5).astype(np.float64))
    return pred, gt


def mae(pred, gt):
    pred, gt = _prepare(pred, gt)
    return float(np.abs(pred - gt).mean())


def thresholds(n=N_THRESHOLDS):
    """The ``n`` equally spaced binarisation thresholds ``k / n`` over [0, 1)."""
    return np.arange(n, dtype=np.float64) / n


def precision_recall(pred, gt, n_thresholds=N_THRESHOLDS):
    """Precision and recall of ``pred >= t`` for every sweep threshold ``t``.

    Precision is defined as 0 where no pixel is predicted positive.
    """
    pred, gt = _prepare(pred, gt)
    n_fg = gt.sum()
    if n_fg == 0:
        raise DataError("ground truth has no foreground pixel; recall undefined")
    positives, true_pos = _kernels.pr_counts(pred, gt, n_thresholds)
    positives = positives.astype(np.float64)
    true_pos = true_pos.astype(np.float64)
    precision = np.divide(true_pos, positives, out=np.zeros_like(true_pos), where=positives > 0)
    recall = true_pos / n_fg
    return precision, recall


def f_measure(precision, recall, beta2=BETA2):
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    num = (1.0 + beta2) * precision * recall
    den = beta2 * precision + recall
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def max_f_measure(pred, gt, beta2=BETA2):
    """Maximum F-measure over the 256-threshold sweep.

    Returns ``(max_f, curve)`` where ``curve`` is a ``(256, 2)`` array of
    (precision, recall) pairs ordered by increasing threshold.
    """
    precision, recall = precision_recall(pred, gt)
    f = f_measure(precision, recall, beta2)
    return float(f.max()), np.stack([precision, recall], axis=1)


# -- S-measure ------------------------------------------------------------------

def _object_similarity(values):
    if values.size == 0:
        return 0.0
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return float(2.0 * x / (x * x + 1.0 + sigma + EPS))


def _object_score(pred, gt):
    fg = pred * gt
    bg = (1.0 - pred) * (1.0 - gt)
    u = gt.mean()
    return u * _object_similarity(fg[gt == 1]) + (1.0 - u) * _object_similarity(bg[gt == 0])


def _centroid(gt):
    h, w = gt.shape
    if gt.sum() == 0:
        x, y = np.round(w / 2), np.round(h / 2)
    else:
        y, x = np.argwhere(gt).mean(axis=0).round()
    return int(x) + 1, int(y) + 1


def _region_score(pred, gt):
    h, w = gt.shape
    x, y = _centroid(gt)
    area = h * w
    w1 = x * y / area
    w2 = y * (w - x) / area
    w3 = (h - y) * x / area
    w4 = 1.0 - w1 - w2 - w3
    blocks = (
        (slice(0, y), slice(0, x), w1),
        (slice(0, y), slice(x, w), w2),
        (slice(y, h), slice(0, x), w3),
        (slice(y, h), slice(x, w), w4),
    )
    score = 0.0
    for rows, cols, weight in blocks:
        p = np.ascontiguousarray(pred[rows, cols])
        g = np.ascontiguousarray(gt[rows, cols])
        if p.size:
            score += weight * _kernels.block_ssim(p, g)
    return score


def s_measure(pred, gt, balance=0.5):
    """Structure measure: ``balance * object + (1 - balance) * region``."""
    pred, gt = _prepare(pred, gt)
    y = gt.mean()
    if y == 0:
        return float(1.0 - pred.mean())
    if y == 1:
        return float(pred.mean())
    score = balance * _object_score(pred, gt) + (1.0 - balance) * _region_score(pred, gt)
    return float(max(0.0, score))


# -- E-measure ------------------------------------------------------------------

def e_measure(pred, gt):
    """Adaptive-threshold enhanced-alignment measure.

    The map is binarised at ``min(2 * mean(pred), 1)``.
    """
    pred, gt = _prepare(pred, gt)
    threshold = min(2.0 * pred.mean(), 1.0)
    pred_bin = (pred >= threshold).astype(np.float64)
    n_fg = gt.sum()
    if n_fg == 0:
        return float((1.0 - pred_bin).mean())
    if n_fg == gt.size:
        return float(pred_bin.mean())
    return float(_kernels.enhanced_alignment(pred_bin, gt))
