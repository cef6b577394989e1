"""Real-data loaders, splits and resampling used by the benchmark tasks."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import make_rng, spawn_seed
from .series import SampledSeries

__all__ = [
    "DatasetSplit",
    "load_uwave",
    "load_uwave_dir",
    "subsample_random_fraction",
    "load_timestamped_csv",
    "regularize_by_interpolation",
    "interpolate_at",
    "temporal_cv_folds",
    "split_indices",
    "synthetic_speleothem",
]

log = logging.getLogger(__name__)

UWAVE_TRAIN = 890
UWAVE_TEST = 3580
UWAVE_CLASSES = 8


@dataclass
class DatasetSplit:
    train: list
    validation: list
    test: list
    recipe: dict = field(default_factory=dict)


def split_indices(n: int, fractions=(0.6, 0.2, 0.2)):
    """Contiguous index ranges for a chronological split."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    cuts = np.round(np.cumsum(fractions) * n).astype(int)
    a, b = cuts[0], cuts[1]
    return np.arange(0, a), np.arange(a, b), np.arange(b, n)


_SPLIT = re.compile(r"[,\s]+")


def load_uwave(path, expected_count: int | None = None) -> list[SampledSeries]:
    """Read one archive file: a sample per line, label first, then the values.

    Labels ``1..8`` become ``0..7``; timestamps are the sample indices. A
    count different from ``expected_count`` is logged, not fatal.
    """
    path = Path(path)
    out = []
    lengths = set()
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith(("#", "@")):
                continue
            try:
                nums = [float(c) for c in _SPLIT.split(line) if c]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed line ({exc})") from None
            if len(nums) < 2:
                raise ValueError(f"{path}:{lineno}: no values after the label")
            label = int(round(nums[0]))
            if label != nums[0] or label < 1:
                raise ValueError(f"{path}:{lineno}: bad label {nums[0]!r}")
            vals = np.asarray(nums[1:])
            lengths.add(len(vals))
            out.append(SampledSeries(np.arange(len(vals), dtype=np.float64), vals,
                                     label=label - 1, meta={"index": len(out)}))
    if expected_count is not None and len(out) != expected_count:
        log.warning("%s: expected %d samples, found %d", path, expected_count, len(out))
    if lengths:
        log.info("%s: %d samples, lengths %s", path, len(out), sorted(lengths))
    return out


def load_uwave_dir(path):
    """Load ``*_TRAIN`` and ``*_TEST`` files (``.tsv``, ``.txt`` or ``.csv``) from a directory."""
    path = Path(path)
    found = {}
    for part in ("TRAIN", "TEST"):
        cands = sorted(p for p in path.iterdir() if re.search(rf"_{part}\.(tsv|txt|csv)$", p.name, re.I))
        if not cands:
            raise FileNotFoundError(f"no *_{part} file in {path}")
        found[part] = cands[0]
    train = load_uwave(found["TRAIN"], UWAVE_TRAIN)
    test = load_uwave(found["TEST"], UWAVE_TEST)
    return train, test


def subsample_random_fraction(series: SampledSeries, fraction: float = 0.10, seed=0) -> SampledSeries:
    """Keep ``ceil(fraction * L)`` random observations, in their original order."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    L = len(series)
    k = math.ceil(round(fraction * L, 9))
    if k >= L:
        return series
    idx = np.sort(make_rng(seed).choice(L, size=k, replace=False))
    return SampledSeries(series.timestamps[idx], series.values[idx], label=series.label,
                         meta=dict(series.meta, kept=idx))


def subsample_collection(seqs, fraction=0.10, seed=0):
    """Subsample each sequence with a seed derived from ``seed`` and its position."""
    return [subsample_random_fraction(s, fraction, spawn_seed(seed, i)) for i, s in enumerate(seqs)]


def load_timestamped_csv(path) -> SampledSeries:
    """Read a ``t,value`` CSV (header optional); rows are sorted by time."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or not "".join(rec).strip():
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: non-numeric row {rec!r}") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows)
    data = data[np.argsort(data[:, 0], kind="stable")]
    dup = np.flatnonzero(np.diff(data[:, 0]) == 0)
    if dup.size:
        raise ValueError(f"{path}: duplicate timestamp {float(data[dup[0], 0])!r}")
    return SampledSeries(data[:, 0], data[:, 1], meta={"source": str(path)})


def interpolate_at(series: SampledSeries, query_times) -> SampledSeries:
    """Piecewise-linear values of ``series`` at ``query_times`` (no extrapolation)."""
    q = np.asarray(query_times, dtype=np.float64).ravel()
    t = series.timestamps
    tol = 1e-9 * max(1.0, abs(t[-1]))
    if q.size and (q.min() < t[0] - tol or q.max() > t[-1] + tol):
        raise ValueError(f"query times [{q.min()}, {q.max()}] outside [{t[0]}, {t[-1]}]")
    vals = np.column_stack([np.interp(q, t, series.values[:, j]) for j in range(series.n_dims)])
    return SampledSeries(q, vals, meta=dict(series.meta))


def regularize_by_interpolation(series: SampledSeries, target_dt: float) -> SampledSeries:
    """Resample onto ``t0, t0 + dt, ...`` up to the last timestamp."""
    if not target_dt > 0:
        raise ValueError("target_dt must be positive")
    t0, t1 = series.timestamps[0], series.timestamps[-1]
    n = int(math.floor((t1 - t0) / target_dt * (1 + 1e-12))) + 1
    grid = t0 + target_dt * np.arange(n)
    return interpolate_at(series, grid)


def temporal_cv_folds(n: int, fold_len: int = 50):
    """Forward-chaining folds over ``range(n)``.

    Returns ``(train_idx, val_idx)`` pairs; fold ``k`` validates
    ``[k * fold_len, (k + 1) * fold_len)`` and trains on everything before.
    """
    if n < 2 * fold_len:
        raise ValueError(f"need at least {2 * fold_len} samples for folds of {fold_len}")
    folds = []
    for start in range(0, n - fold_len + 1, fold_len):
        folds.append((np.arange(0, start), np.arange(start, start + fold_len)))
    return folds


def synthetic_speleothem(n: int = 1800, seed: int = 0) -> SampledSeries:
    """Stand-in for an isotope record: irregular dating, trend, cycles and red noise.

    Steps are log-normal (median about 1.3 years) with occasional wide gaps.
    Values are around -8, so percentage errors are of the same order as for
    real oxygen-isotope readings.
    """
    rng = make_rng(seed)
    dt = np.exp(rng.normal(np.log(1.3), 0.45, size=n - 1))
    gaps = rng.random(n - 1) < 0.02
    dt[gaps] *= rng.uniform(3.0, 8.0, size=gaps.sum())
    t = np.concatenate([[0.0], np.cumsum(dt)])
    span = t[-1]
    noise = np.empty(n)
    noise[0] = 0.0
    for i in range(1, n):
        rho = math.exp(-dt[i - 1] / 15.0)
        noise[i] = rho * noise[i - 1] + math.sqrt(1 - rho * rho) * rng.normal()
    x = (-8.0 + 0.4 * (t / span) + 0.35 * np.sin(2 * np.pi * t / 160.0)
         + 0.2 * np.sin(2 * np.pi * t / 57.0 + 1.0) + 0.12 * noise)
    return SampledSeries(t, x, meta={"source": "synthetic_speleothem", "seed": seed})
