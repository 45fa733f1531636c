from .measures import (
    BETA2,
    N_THRESHOLDS,
    e_measure,
    f_measure,
    mae,
    max_f_measure,
    precision_recall,
    s_measure,
    thresholds,
)
from .report import MetricReport, evaluate_dataset, read_report

__all__ = [
    "BETA2",
    "N_THRESHOLDS",
    "MetricReport",
    "e_measure",
    "evaluate_dataset",
    "f_measure",
    "mae",
    "max_f_measure",
    "precision_recall",
    "read_report",
    "s_measure",
    "thresholds",
]
