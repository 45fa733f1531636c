"""Dataset-level aggregation and on-disk report format."""
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .measures import (
    BETA2,
    N_THRESHOLDS,
    _prepare,
    e_measure,
    f_measure,
    mae,
    precision_recall,
    s_measure,
    thresholds,
)

logger = logging.getLogger(__name__)

REPORT_FILE = "report.txt"
CURVE_FILE = "pr_curve.csv"


@dataclass
class MetricReport:
    mae: float
    max_f: float
    s_measure: float
    e_measure: float
    pr_curve: np.ndarray  # (256, 2): precision, recall per threshold
    n_images: int = 0
    n_empty_gt: int = 0
    header: dict = field(default_factory=dict)

    @property
    def thresholds(self):
        return thresholds(len(self.pr_curve))

    def as_dict(self):
        return {
            "mae": self.mae,
            "max_f": self.max_f,
            "s_measure": self.s_measure,
            "e_measure": self.e_measure,
            "n_images": self.n_images,
            "n_empty_gt": self.n_empty_gt,
        }

    def to_text(self):
        lines = [f"# {k} = {v}" for k, v in self.header.items()]
        for k, v in self.as_dict().items():
            lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, REPORT_FILE), "w") as fh:
            fh.write(self.to_text())
        rows = np.column_stack([self.thresholds, self.pr_curve])
        np.savetxt(
            os.path.join(out_dir, CURVE_FILE), rows, delimiter=",",
            header="threshold,precision,recall", comments="", fmt="%.10g",
        )


def read_report(path):
    """Parse a ``report.txt`` back into ``(values, header)`` dicts of strings."""
    values, header = {}, {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            target = header if line.startswith("#") else values
            key, _, val = line.lstrip("# ").partition("=")
            target[key.strip()] = val.strip()
    return values, header


def evaluate_dataset(preds, gts, beta2=BETA2):
    """Aggregate metrics over aligned lists of prediction and GT maps.

    MAE, S and E are per-image means; the P-R curve is averaged per threshold
    and max F is taken from the averaged curve. Images with an empty GT only
    contribute to MAE.
    """
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts):
        raise ValueError(f"misaligned inputs: {len(preds)} predictions vs {len(gts)} ground truths")
    if not preds:
        raise ValueError("evaluate_dataset needs at least one image")

    maes, sms, ems, precisions, recalls = [], [], [], [], []
    n_empty = 0
    for pred, gt in zip(preds, gts):
        pred, gt = _prepare(pred, gt)
        maes.append(mae(pred, gt))
        if gt.sum() == 0:
            n_empty += 1
            continue
        p, r = precision_recall(pred, gt)
        precisions.append(p)
        recalls.append(r)
        sms.append(s_measure(pred, gt))
        ems.append(e_measure(pred, gt))
    if n_empty:
        logger.info("excluded %d empty-GT image(s) from F/S/E", n_empty)

    if precisions:
        p_mean = np.mean(precisions, axis=0)
        r_mean = np.mean(recalls, axis=0)
        max_f = float(f_measure(p_mean, r_mean, beta2).max())
        s_val, e_val = float(np.mean(sms)), float(np.mean(ems))
    else:
        p_mean = r_mean = np.full(N_THRESHOLDS, np.nan)
        max_f = s_val = e_val = float("nan")

    return MetricReport(
        mae=float(np.mean(maes)),
        max_f=max_f,
        s_measure=s_val,
        e_measure=e_val,
        pr_curve=np.stack([p_mean, r_mean], axis=1),
        n_images=len(preds),
        n_empty_gt=n_empty,
        header={"e_measure_variant": "adaptive", "beta2": beta2, "thresholds": N_THRESHOLDS},
    )
