"""Irregularity sweep: ESN vs TAESN generative error as sampling gets less regular.

Hyperparameters are tuned once on regularly sampled data. For each
irregularity factor ``pi`` a fresh data set is drawn, and every run
initializes an ESN and a TAESN from the same seed (so the two start out
identical), fits both readouts on the training split and scores a
closed-loop forecast on one test segment.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..datagen import (LorenzConfig, MackeyGlassConfig, generate_lorenz,
                       generate_mackey_glass, irregularize_mg)
from ..datasets import split_indices
from ..numerics import spawn_seed
from ..reservoir import init_reservoir, run_generative, train_readout
from ..series import SampledSeries
from ..timegrid import TimeTransform
from .config import ExperimentConfig
from .grid import GridResult, grid_search
from .metrics import evaluate_metrics, summarize

log = logging.getLogger(__name__)

SYSTEMS = {"lorenz_sweep": "lorenz", "mg_sweep": "mg"}
_BASE_DT = {"lorenz": 0.01, "mg": 1.0}


@dataclass
class SweepSettings:
    system: str = "lorenz"
    pi_values: list = field(default_factory=lambda: [0.0, 0.01, 0.02, 0.03, 0.04, 0.05])
    n_runs: int = 50
    n_units: int = 500
    n_steps: int = 10_000
    prime: int = 100
    horizon: int = 200
    washout: int = 100
    n_val_segments: int = 5
    fractions: tuple = (0.6, 0.2, 0.2)
    readout_input: bool = True
    nrmse_cap: float = 2.0
    data_seed: int = 0
    base_seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.system not in _BASE_DT:
            raise ValueError(f"system must be 'lorenz' or 'mg', got {self.system!r}")
        if self.n_runs < 0 or self.prime < 1 or self.horizon < 1:
            raise ValueError("n_runs >= 0, prime >= 1 and horizon >= 1 are required")

    @property
    def base_dt(self) -> float:
        return _BASE_DT[self.system]

    @classmethod
    def from_experiment(cls, cfg: ExperimentConfig) -> "SweepSettings":
        if cfg.task not in SYSTEMS:
            raise ValueError(f"task {cfg.task!r} is not a sweep")
        kw = {k: v for k, v in cfg.options.items() if k in cls.__dataclass_fields__}
        kw.setdefault("system", SYSTEMS[cfg.task])
        if cfg.task == "mg_sweep":
            kw.setdefault("n_steps", 5000)
            kw.setdefault("pi_values", [round(0.1 * k, 1) for k in range(9)])
        kw.setdefault("base_seed", cfg.seeds[0])
        if "fractions" in kw:
            kw["fractions"] = tuple(kw["fractions"])
        return cls(**kw)


@dataclass
class SweepResult:
    settings: dict
    params: dict
    rows: list      # one per (pi, variant, run)
    summary: list   # one per (pi, variant)
    tuning: GridResult | None = None


# --- data -----------------------------------------------------------------

def _mg_fine(s: SweepSettings, max_pi: float) -> SampledSeries:
    span = (s.n_steps + 2) * (1.0 + max_pi)
    n_fine = int(math.ceil(span / 0.01)) + 2
    return generate_mackey_glass(MackeyGlassConfig(n_steps=n_fine))


def make_sweep_data(s: SweepSettings, pi: float, fine: SampledSeries | None = None) -> SampledSeries:
    """Series for one ``pi``, standardized with its training-split statistics."""
    if s.system == "lorenz":
        raw = generate_lorenz(LorenzConfig(n_steps=s.n_steps, pi=pi, seed=s.data_seed))
    else:
        if fine is None:
            fine = _mg_fine(s, pi)
        raw = irregularize_mg(fine, pi, seed=s.data_seed, n_points=s.n_steps)
    tr, _, _ = split_indices(len(raw), s.fractions)
    mu = raw.values[tr].mean(axis=0)
    sd = raw.values[tr].std(axis=0)
    meta = dict(raw.meta, mean=mu.tolist(), std=sd.tolist())
    return SampledSeries(raw.timestamps, (raw.values - mu) / sd, meta=meta)


def segment_starts(lo: int, hi: int, count: int, length: int) -> np.ndarray:
    """``count`` evenly spread starts of windows of ``length`` inside ``[lo, hi)``."""
    if count == 0:
        return np.empty(0, dtype=int)
    last = hi - length
    if last < lo:
        raise ValueError(f"region [{lo}, {hi}) is shorter than a segment of {length}")
    return np.linspace(lo, last, count).round().astype(int)


def generative_error(model, series: SampledSeries, start: int, prime: int, horizon: int,
                     cap: float = 2.0) -> dict:
    """Prime on ``prime + 1`` points from ``start``, generate ``horizon`` steps, score NRMSE."""
    seg = series[start:start + prime + 1 + horizon]
    primer = seg[:prime + 1]
    truth = seg.values[prime + 1:]
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            pred = run_generative(model, primer, seg.deltas[prime:]).values
            raw = evaluate_metrics(pred, truth)["nrmse"]
    except FloatingPointError:
        raw = math.inf
    diverged = not (raw < cap)
    return {"nrmse": min(raw, cap), "nrmse_raw": raw, "diverged": diverged}


def _build(variant, s: SweepSettings, n_in, params, seed):
    alpha = params["alpha"]
    tf = None
    if variant == "taesn":
        # normalized by the regular step; allow alpha * dt up to 1 for longer steps
        tf = TimeTransform.fixed("linear", s.base_dt, clip=1.0 / alpha)
    return init_reservoir(variant, s.n_units, n_in, alpha, params["radius"],
                          params.get("input_scaling", 1.0), tf, s.readout_input, rng=seed)


def _fit(variant, s, train, params, seed):
    m = _build(variant, s, train.n_dims, params, seed)
    return train_readout(m, train, lam=params["lambda"], washout=s.washout)


# --- tuning ---------------------------------------------------------------

def tune_at_regular(s: SweepSettings, grid: dict, data: SampledSeries | None = None) -> GridResult:
    """Grid-search the ESN on regularly sampled data by generative validation error."""
    if data is None:
        data = make_sweep_data(s, 0.0)
    tr, va, _ = split_indices(len(data), s.fractions)
    train = data[:len(tr)]
    length = s.prime + 1 + s.horizon
    starts = segment_starts(va[0], va[-1] + 1, s.n_val_segments, length)
    seed = spawn_seed(s.base_seed, 10**6)

    def evaluate(**params):
        m = _fit("esn", s, train, params, seed)
        errs = [generative_error(m, data, int(st), s.prime, s.horizon, s.nrmse_cap)["nrmse"]
                for st in starts]
        return float(np.mean(errs))

    return grid_search(evaluate, grid, n_jobs=s.n_jobs)


# --- sweep ----------------------------------------------------------------

def irregularity_sweep(s: SweepSettings, params: dict, pi_values=None) -> SweepResult:
    """Score ESN and TAESN over ``pi_values`` with fixed hyperparameters ``params``."""
    pis = list(s.pi_values if pi_values is None else pi_values)
    rows = []
    fine = _mg_fine(s, max(pis)) if (s.system == "mg" and pis and s.n_runs) else None
    for pi in pis:
        if s.n_runs == 0:
            break
        data = make_sweep_data(s, pi, fine)
        tr, _, te = split_indices(len(data), s.fractions)
        train = data[:len(tr)]
        starts = segment_starts(te[0], te[-1] + 1, s.n_runs, s.prime + 1 + s.horizon)

        def one(r):
            seed = spawn_seed(s.base_seed, r)
            out = []
            for variant in ("esn", "taesn"):
                m = _fit(variant, s, train, params, seed)
                err = generative_error(m, data, int(starts[r]), s.prime, s.horizon, s.nrmse_cap)
                out.append({"pi": float(pi), "variant": variant, "run": r, "seed": seed,
                            "start": int(starts[r]), **err})
            return out

        if s.n_jobs == 1:
            results = [one(r) for r in range(s.n_runs)]
        else:
            with ThreadPoolExecutor(max_workers=s.n_jobs) as pool:
                results = list(pool.map(one, range(s.n_runs)))
        for res in results:
            rows.extend(res)
        log.info("pi=%g done", pi)
    rows.sort(key=lambda r: (r["pi"], r["variant"], r["run"]))
    return SweepResult(settings=asdict(s), params=dict(params), rows=rows,
                       summary=summarize_sweep(rows))


def summarize_sweep(rows) -> list:
    """Median/min/max NRMSE per ``(pi, variant)``, recomputed from the run rows."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["pi"], r["variant"]), []).append(r)
    out = []
    for (pi, variant), rs in sorted(groups.items()):
        st = summarize([r["nrmse"] for r in rs])
        out.append({"pi": pi, "variant": variant, "median": st["median"], "min": st["min"],
                    "max": st["max"], "n": st["n"],
                    "n_diverged": sum(bool(r["diverged"]) for r in rs)})
    return out


def median_table(result: SweepResult) -> dict:
    """``{variant: {pi: median}}`` view of the summary."""
    out: dict = {}
    for row in result.summary:
        out.setdefault(row["variant"], {})[row["pi"]] = row["median"]
    return out


def run_sweep(cfg: ExperimentConfig, params: dict | None = None) -> SweepResult:
    """Tune at regular sampling (unless ``params`` is given), then sweep."""
    s = SweepSettings.from_experiment(cfg)
    tuning = None
    if params is None:
        tuning = tune_at_regular(s, cfg.grid)
        params = tuning.best_params
        log.info("tuned at pi=0: %s (score %.4g)", params, tuning.best_score)
    result = irregularity_sweep(s, params)
    result.tuning = tuning
    return result
