"""Error metrics and per-seed result aggregation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


def evaluate_metrics(pred, truth) -> dict:
    """RMSE, NRMSE (RMSE over the pooled per-dimension std) and MAPE in percent.

    Zero-valued truths are left out of the MAPE, with a logged count.
    """
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: pred {p.shape} vs truth {t.shape}")
    if p.ndim == 1:
        p, t = p[:, None], t[:, None]
    err = p - t
    rmse = float(np.sqrt(np.mean(err ** 2)))
    scale = float(np.sqrt(np.mean(np.var(t, axis=0))))
    nrmse = rmse / scale if scale > 0 else math.inf
    nz = t != 0
    if not np.all(nz):
        log.warning("MAPE: ignoring %d zero-valued truths", int((~nz).sum()))
    mape = float(np.mean(np.abs(err[nz]) / np.abs(t[nz])) * 100.0) if nz.any() else math.nan
    return {"rmse": rmse, "nrmse": nrmse, "mape": mape}


def accuracy(pred_labels, true_labels) -> float:
    p = np.asarray(pred_labels)
    t = np.asarray(true_labels)
    if p.shape != t.shape:
        raise ValueError("label arrays differ in length")
    return float(np.mean(p == t))


def summarize(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    return {"mean": float(v.mean()), "std": float(v.std()), "median": float(np.median(v)),
            "min": float(v.min()), "max": float(v.max()), "n": int(v.size)}


@dataclass
class RunResult:
    """Per-seed metric records of one model row plus the chosen hyperparameters."""

    name: str
    records: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def aggregate(self, metric: str) -> dict:
        return summarize([r[metric] for r in self.records])
