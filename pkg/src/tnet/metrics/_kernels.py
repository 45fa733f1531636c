"""Hot per-pixel loops behind the saliency metrics.

Every kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version. ``tnet._accel.USE_NUMBA`` picks which one the public names bind to.
Inputs are float64 maps; gt is a float64 map holding only 0 and 1.
"""
import numpy as np

from .._accel import USE_NUMBA, njit

EPS = float(np.finfo(np.float64).eps)


# -- threshold sweep -----------------------------------------------------------

def pr_counts_numpy(pred, gt, n_thresholds):
    """Counts of predicted-positive and true-positive pixels per threshold.

    Threshold ``k`` is ``k / n_thresholds``; a pixel is positive when
    ``pred >= k / n_thresholds``.
    """
    n = n_thresholds
    bins = np.minimum((pred.ravel() * n).astype(np.int64), n - 1)
    fg = gt.ravel() > 0.5
    hist_all = np.bincount(bins, minlength=n)
    hist_fg = np.bincount(bins[fg], minlength=n)
    positives = np.cumsum(hist_all[::-1])[::-1]
    true_pos = np.cumsum(hist_fg[::-1])[::-1]
    return positives.astype(np.int64), true_pos.astype(np.int64)


@njit(cache=True)
def pr_counts_numba(pred, gt, n_thresholds):
    n = n_thresholds
    hist_all = np.zeros(n, dtype=np.int64)
    hist_fg = np.zeros(n, dtype=np.int64)
    h, w = pred.shape
    for i in range(h):
        for j in range(w):
            b = int(pred[i, j] * n)
            if b > n - 1:
                b = n - 1
            hist_all[b] += 1
            if gt[i, j] > 0.5:
                hist_fg[b] += 1
    positives = np.zeros(n, dtype=np.int64)
    true_pos = np.zeros(n, dtype=np.int64)
    acc_all = 0
    acc_fg = 0
    for k in range(n - 1, -1, -1):
        acc_all += hist_all[k]
        acc_fg += hist_fg[k]
        positives[k] = acc_all
        true_pos[k] = acc_fg
    return positives, true_pos


# -- S-measure block SSIM -------------------------------------------------------

def block_ssim_numpy(pred, gt):
    """Structural similarity of one block, as used by the region term."""
    n = pred.size
    if n == 0:
        return 0.0
    x = pred.mean()
    y = gt.mean()
    dx = pred - x
    dy = gt - y
    sigma_x = (dx * dx).sum() / (n - 1 + EPS)
    sigma_y = (dy * dy).sum() / (n - 1 + EPS)
    sigma_xy = (dx * dy).sum() / (n - 1 + EPS)
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0.0:
        return float(alpha / (beta + EPS))
    if beta == 0.0:
        return 1.0
    return 0.0


@njit(cache=True)
def block_ssim_numba(pred, gt):
    h, w = pred.shape
    n = h * w
    if n == 0:
        return 0.0
    sx = 0.0
    sy = 0.0
    for i in range(h):
        for j in range(w):
            sx += pred[i, j]
            sy += gt[i, j]
    x = sx / n
    y = sy / n
    vx = 0.0
    vy = 0.0
    cxy = 0.0
    for i in range(h):
        for j in range(w):
            dx = pred[i, j] - x
            dy = gt[i, j] - y
            vx += dx * dx
            vy += dy * dy
            cxy += dx * dy
    denom = n - 1 + EPS
    sigma_x = vx / denom
    sigma_y = vy / denom
    sigma_xy = cxy / denom
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0.0:
        return alpha / (beta + EPS)
    if beta == 0.0:
        return 1.0
    return 0.0


# -- E-measure alignment --------------------------------------------------------

def enhanced_alignment_numpy(pred_bin, gt):
    """Mean of the enhanced alignment matrix ``(1 + align)^2 / 4``."""
    pc = pred_bin - pred_bin.mean()
    gc = gt - gt.mean()
    align = 2.0 * pc * gc / (pc * pc + gc * gc + EPS)
    return float((((align + 1.0) ** 2) / 4.0).mean())


@njit(cache=True)
def enhanced_alignment_numba(pred_bin, gt):
    h, w = pred_bin.shape
    n = h * w
    mp = 0.0
    mg = 0.0
    for i in range(h):
        for j in range(w):
            mp += pred_bin[i, j]
            mg += gt[i, j]
    mp /= n
    mg /= n
    total = 0.0
    for i in range(h):
        for j in range(w):
            pc = pred_bin[i, j] - mp
            gc = gt[i, j] - mg
            a = 2.0 * pc * gc / (pc * pc + gc * gc + EPS)
            total += (a + 1.0) * (a + 1.0) / 4.0
    return total / n


if USE_NUMBA:
    pr_counts = pr_counts_numba
    block_ssim = block_ssim_numba
    enhanced_alignment = enhanced_alignment_numba
else:
    pr_counts = pr_counts_numpy
    block_ssim = block_ssim_numpy
    enhanced_alignment = enhanced_alignment_numpy
