"""Classification (UWave) and timestamped-prediction benchmark tables."""

from __future__ import annotations

import functools
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..datasets import (UWAVE_CLASSES, load_timestamped_csv, load_uwave_dir,
                        regularize_by_interpolation, subsample_collection,
                        synthetic_speleothem, temporal_cv_folds)
from ..gated import GRUClassifier, GRUForecaster, gated_generate
from ..numerics import make_rng, spawn_seed
from ..reservoir import (classify_sequence, init_reservoir, readout_from_states,
                         run_generative, run_teacher_forced, train_classifier_readout)
from ..series import SampledSeries
from ..timegrid import TimeTransform
from .config import ExperimentConfig
from .grid import grid_search
from .metrics import RunResult, accuracy, evaluate_metrics

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RowSpec:
    name: str            # label as printed in the table
    family: str          # "reservoir" or "gated"
    variant: str
    transform: str | None = None
    validation: str = "standard"
    interp: bool = False

    @property
    def key(self) -> str:
        parts = [self.name.replace(" ", "")]
        if self.transform and self.variant != "esnt":
            parts.append(self.transform)
        if self.validation == "cv":
            parts.append("CV")
        return "-".join(parts)


TABLE1_ROWS = (
    RowSpec("ESNT", "reservoir", "esnt", "linear"),
    RowSpec("TAESN", "reservoir", "taesn", "linear"),
    RowSpec("TAESN", "reservoir", "taesn", "exp"),
    RowSpec("GRU", "gated", "gru"),
    RowSpec("GRUT", "gated", "grut", "linear"),
    RowSpec("TAGRU", "gated", "tagru", "linear"),
    RowSpec("TAGRU", "gated", "tagru", "exp"),
)

TABLE2_ROWS = (
    RowSpec("ESN", "reservoir", "esn", None, "cv"),
    RowSpec("Interp. ESN", "reservoir", "esn", None, "cv", True),
    RowSpec("ESNT", "reservoir", "esnt", "exp", "cv"),
    RowSpec("TAESN", "reservoir", "taesn", "linear", "cv"),
    RowSpec("TAESN", "reservoir", "taesn", "exp", "cv"),
    RowSpec("ESN", "reservoir", "esn", None, "standard"),
    RowSpec("Interp. ESN", "reservoir", "esn", None, "standard", True),
    RowSpec("ESNT", "reservoir", "esnt", "linear", "standard"),
    RowSpec("TAESN", "reservoir", "taesn", "linear", "standard"),
    RowSpec("TAESN", "reservoir", "taesn", "exp", "standard"),
    RowSpec("GRU", "gated", "gru", None, "standard"),
    RowSpec("Interp. GRU", "gated", "gru", None, "standard", True),
    RowSpec("GRUT", "gated", "grut", "linear", "standard"),
    RowSpec("TAGRU", "gated", "tagru", "linear", "standard"),
)


def select_rows(all_rows, keys):
    if keys is None:
        return list(all_rows)
    by_key = {r.key: r for r in all_rows}
    missing = [k for k in keys if k not in by_key]
    if missing:
        raise ValueError(f"unknown rows {missing}; choose from {sorted(by_key)}")
    return [by_key[k] for k in keys]


@dataclass
class TableResult:
    rows: list = field(default_factory=list)   # RunResult per table row
    config: dict = field(default_factory=dict)

    def by_key(self) -> dict:
        return {r.name: r for r in self.rows}


def _transform(kind, deltas, exp_scale):
    if kind is None:
        return None
    return TimeTransform(kind=kind, scale=exp_scale if kind == "exp" else 1.0).fit(deltas)


def _reservoir_grid(grid):
    out = {k: grid[k] for k in ("alpha", "radius", "lambda", "input_scaling") if k in grid}
    for k in ("alpha", "radius", "lambda"):
        if k not in out:
            raise ValueError(f"reservoir rows need a {k!r} grid axis")
    return out


# --- Table 1 ---------------------------------------------------------------

def find_uwave(cfg: ExperimentConfig) -> Path:
    path = cfg.data.get("uwave_dir") or os.environ.get("UWAVE_DIR")
    if not path:
        raise FileNotFoundError("UWave data not configured: set data.uwave_dir or UWAVE_DIR")
    return Path(path)


def prepare_uwave(cfg: ExperimentConfig):
    """Subsampled train/validation/test collections with integer labels."""
    train, test = load_uwave_dir(find_uwave(cfg))
    frac = cfg.data.get("fraction", 0.10)
    dseed = cfg.data.get("seed", 0)
    train = subsample_collection(train, frac, spawn_seed(dseed, 1))
    test = subsample_collection(test, frac, spawn_seed(dseed, 2))
    n_val = int(round(cfg.option("validation_fraction", 0.3) * len(train)))
    perm = make_rng(spawn_seed(dseed, 3)).permutation(len(train))
    val = [train[i] for i in np.sort(perm[:n_val])]
    train = [train[i] for i in np.sort(perm[n_val:])]
    return train, val, test


def _labels(seqs):
    return np.array([s.label for s in seqs], dtype=int)


def _esn_classifier(spec, train, params, seed, cfg, deltas):
    tf = _transform(spec.transform, deltas, cfg.option("exp_scale", 1.0))
    m = init_reservoir(spec.variant, cfg.option("n_units", 500), train[0].n_dims, params["alpha"],
                       params["radius"], params.get("input_scaling", 1.0), tf,
                       cfg.option("readout_input", True), rng=seed)
    return train_classifier_readout(m, train, _labels(train), UWAVE_CLASSES, lam=params["lambda"],
                                    washout=cfg.option("esn_washout", 5),
                                    pooling=cfg.option("pooling", "mean"))


def _esn_accuracy(model, seqs):
    pred = [int(np.argmax(classify_sequence(model, s))) for s in seqs]
    return accuracy(pred, _labels(seqs))


def tune_table1_row(spec, cfg, train, val):
    """Validation-accuracy grid search for one reservoir row."""
    deltas = np.concatenate([s.deltas for s in train])
    tune_seed = spawn_seed(cfg.seeds[0], 0)
    return grid_search(lambda **p: _esn_accuracy(_esn_classifier(spec, train, p, tune_seed, cfg, deltas), val),
                       _reservoir_grid(cfg.grid), maximize=True, n_jobs=cfg.option("n_jobs", 1))


def _table1_reservoir(spec, cfg, train, val, test):
    deltas = np.concatenate([s.deltas for s in train])
    res = tune_table1_row(spec, cfg, train, val)
    out = RunResult(spec.key, params=res.best_params, extra={"grid": res.table})
    for s in cfg.seeds:
        t0 = time.perf_counter()
        m = _esn_classifier(spec, train, res.best_params, spawn_seed(s, 0), cfg, deltas)
        dt = time.perf_counter() - t0
        out.records.append({"seed": s, "accuracy": _esn_accuracy(m, test),
                            "val_accuracy": _esn_accuracy(m, val), "train_time_s": dt,
                            "n_params": m.n_params})
    return out


def _best_epoch(history):
    """Epoch with the lowest validation loss."""
    best, at = math.inf, 0
    for h in history:
        if h["val_loss"] < best:
            best, at = h["val_loss"], h["epoch"]
    return at


def _table1_gated(spec, cfg, train, val, test):
    out = RunResult(spec.key, params={"n_hidden": cfg.option("n_hidden", 100),
                                      "epochs": cfg.option("epochs", 100)})
    for s in cfg.seeds:
        clf = GRUClassifier(variant=spec.variant, n_hidden=cfg.option("n_hidden", 100),
                            epochs=cfg.option("epochs", 100), batch_size=cfg.option("batch_size", 32),
                            lr=cfg.option("lr", 1e-3), time_transform=spec.transform or "linear",
                            time_scale=cfg.option("exp_scale", 1.0), random_state=spawn_seed(s, 0))
        t0 = time.perf_counter()
        clf.fit(train, _labels(train), X_val=val, y_val=_labels(val))
        dt = time.perf_counter() - t0
        out.records.append({"seed": s, "accuracy": accuracy(clf.predict(test), _labels(test)),
                            "val_accuracy": accuracy(clf.predict(val), _labels(val)),
                            "train_time_s": dt, "n_params": clf.model_.n_params,
                            "best_epoch": _best_epoch(clf.history_)})
    return out


def run_table1(cfg: ExperimentConfig, data=None) -> TableResult:
    """Accuracy of the time-aware models on subsampled gesture sequences.

    ``data`` may be a ready ``(train, val, test)`` triple of labelled
    sequences; otherwise the UWave files are loaded and subsampled.
    """
    train, val, test = prepare_uwave(cfg) if data is None else data
    rows = select_rows(TABLE1_ROWS, cfg.option("rows", None))
    result = TableResult(config=cfg.to_dict())
    for spec in rows:
        t0 = time.perf_counter()
        run = (_table1_reservoir if spec.family == "reservoir" else _table1_gated)(spec, cfg, train, val, test)
        run.runtime_s = time.perf_counter() - t0
        run.extra["f_dt"] = spec.transform or "--"
        log.info("%s: accuracy %.3f", spec.key, run.aggregate("accuracy")["mean"])
        result.rows.append(run)
    return result


def table1_rows(result: TableResult) -> list:
    out = []
    for run in result.rows:
        acc = run.aggregate("accuracy")
        out.append({"model": run.name, "parameters": run.records[0]["n_params"],
                    "accuracy_mean": acc["mean"], "accuracy_std": acc["std"],
                    "train_time_s": float(np.mean([r["train_time_s"] for r in run.records])),
                    "f_dt": run.extra.get("f_dt", "--"), "n_seeds": acc["n"]})
    return out


# --- Table 2 ---------------------------------------------------------------

@dataclass
class PredictionData:
    series: SampledSeries    # standardized
    mean: float
    std: float
    n_train: int
    n_val: int
    n_test: int

    @property
    def train_end(self):
        return self.n_train

    @property
    def val_end(self):
        return self.n_train + self.n_val

    def original(self, v):
        return np.asarray(v) * self.std + self.mean


def prepare_prediction(cfg: ExperimentConfig) -> PredictionData:
    d = cfg.data
    if d.get("csv"):
        raw = load_timestamped_csv(d["csv"])
    else:
        raw = synthetic_speleothem(d.get("n", 1800), d.get("seed", 0))
    n_train, n_val, n_test = d.get("n_train", 1700), d.get("n_val", 50), d.get("n_test", 50)
    total = n_train + n_val + n_test
    if len(raw) < total:
        raise ValueError(f"series has {len(raw)} samples, split needs {total}")
    raw = raw[:total]
    if raw.n_dims != 1:
        raise ValueError("prediction benchmark expects a univariate series")
    mu = float(raw.values[:n_train].mean())
    sd = float(raw.values[:n_train].std())
    z = SampledSeries(raw.timestamps, (raw.values - mu) / sd, meta=dict(raw.meta))
    return PredictionData(z, mu, sd, n_train, n_val, n_test)


class _View:
    """What a model sees: the original series or its regular resampling."""

    def __init__(self, data: PredictionData, interp: bool):
        self.data = data
        s = data.series
        self.interp = interp
        if interp:
            self.dt = float(np.mean(s.deltas[: data.n_train - 1]))
            self.series = regularize_by_interpolation(s, self.dt)
        else:
            self.dt = None
            self.series = s

    def end(self, n_orig):
        """Number of model-series points known once ``n_orig`` samples are observed."""
        if not self.interp:
            return n_orig
        t_last = self.data.series.timestamps[n_orig - 1]
        return int(np.searchsorted(self.series.timestamps, t_last, side="right"))

    def horizon(self, end, query_times):
        """Step sizes to generate from model point ``end - 1`` past ``query_times``."""
        t0 = self.series.timestamps[end - 1]
        if not self.interp:
            return np.diff(np.concatenate([[t0], query_times]))
        n = int(math.ceil((query_times[-1] - t0) / self.dt - 1e-9))
        return np.full(max(n, 1), self.dt)

    def to_queries(self, end, generated: SampledSeries, query_times):
        if not self.interp:
            return generated.values[:, 0]
        t = np.concatenate([[self.series.timestamps[end - 1]], generated.timestamps])
        v = np.concatenate([[self.series.values[end - 1, 0]], generated.values[:, 0]])
        return np.interp(query_times, t, v)


def _windows_for(data: PredictionData, cv: bool, cv_fold: int, min_history: int):
    """(history length, query slice) pairs used to score a hyperparameter cell."""
    if not cv:
        return [(data.train_end, slice(data.train_end, data.val_end))]
    out = []
    for _, va in temporal_cv_folds(data.n_train, cv_fold):
        if va[0] >= min_history:
            out.append((int(va[0]), slice(int(va[0]), int(va[-1]) + 1)))
    if not out:
        raise ValueError("no cross-validation fold has enough history")
    return out


class _ReservoirRow:
    def __init__(self, spec: RowSpec, data: PredictionData, cfg: ExperimentConfig):
        self.spec, self.data, self.cfg = spec, data, cfg
        self.view = _View(data, spec.interp)
        self.washout = cfg.option("esn_washout", 100)
        tr_deltas = data.series.deltas[: data.n_train - 1]
        self.tf = _transform(spec.transform, tr_deltas, cfg.option("exp_scale", 1.0))

    @functools.lru_cache(maxsize=64)
    def trajectory(self, alpha, radius, input_scaling, seed):
        m = init_reservoir(self.spec.variant, self.cfg.option("n_units", 50), 1, alpha, radius,
                           input_scaling, self.tf, self.cfg.option("readout_input", True), rng=seed)
        states, inputs = run_teacher_forced(m, self.view.series)
        return m, states, inputs

    def fit(self, params, seed, n_orig):
        m, states, inputs = self.trajectory(params["alpha"], params["radius"],
                                            params.get("input_scaling", 1.0), seed)
        k = self.view.end(n_orig)
        return readout_from_states(m, states[:k], inputs[:k], self.view.series.values[:k],
                                   lam=params["lambda"], washout=self.washout)

    def forecast(self, model, params, seed, n_orig, idx: slice):
        """Predictions (standardized) at original sample indices ``idx`` after ``n_orig`` observations."""
        _, states, _ = self.trajectory(params["alpha"], params["radius"],
                                       params.get("input_scaling", 1.0), seed)
        k = self.view.end(n_orig)
        q = self.data.series.timestamps[idx]
        primer = self.view.series[k - 1:k]
        with np.errstate(over="ignore", invalid="ignore"):
            gen = run_generative(model, primer, self.view.horizon(k, q), h0=states[k - 1])
        return self.view.to_queries(k, gen, q)

    def score(self, params, seed, windows):
        errs = []
        for n_orig, idx in windows:
            m = self.fit(params, seed, n_orig)
            pred = self.forecast(m, params, seed, n_orig, idx)
            if not np.all(np.isfinite(pred)):
                raise FloatingPointError("generation diverged")
            truth = self.data.series.values[idx, 0]
            errs.append(evaluate_metrics(self.data.original(pred), self.data.original(truth))["rmse"])
        return float(np.mean(errs))


def _row_windows(row, spec, cfg, data):
    return _windows_for(data, spec.validation == "cv", cfg.option("cv_fold", 50),
                        cfg.option("cv_min_history", row.washout + 100))


def tune_table2_row(spec, cfg, data, row=None):
    """Grid search for one reservoir row by mean validation RMSE (fold mean under CV)."""
    row = _ReservoirRow(spec, data, cfg) if row is None else row
    windows = _row_windows(row, spec, cfg, data)
    tune_seed = spawn_seed(cfg.seeds[0], 0)
    return grid_search(lambda **p: row.score(p, tune_seed, windows), _reservoir_grid(cfg.grid),
                       n_jobs=cfg.option("n_jobs", 1))


def _forecast_metrics(forecast, data, idx):
    """Metrics in original units; a diverged forecast scores inf everywhere."""
    try:
        pred = forecast()
    except FloatingPointError:
        log.warning("forecast diverged; recording inf metrics")
        return {"rmse": math.inf, "nrmse": math.inf, "mape": math.inf}
    return evaluate_metrics(data.original(pred), data.original(data.series.values[idx, 0]))


def _table2_reservoir(spec, cfg, data):
    row = _ReservoirRow(spec, data, cfg)
    windows = _row_windows(row, spec, cfg, data)
    res = tune_table2_row(spec, cfg, data, row)
    p = res.best_params
    out = RunResult(spec.key, params=p, extra={"grid": res.table})
    test_idx = slice(data.val_end, data.val_end + data.n_test)
    for s in cfg.seeds:
        seed = spawn_seed(s, 0)
        t0 = time.perf_counter()
        try:
            val_rmse = row.score(p, seed, windows)
        except FloatingPointError:
            val_rmse = math.inf  # this seed's reservoir diverges under the tuned cell
        # the final readout always comes from the whole training region
        m = row.fit(p, seed, data.train_end)
        dt = time.perf_counter() - t0
        met = _forecast_metrics(lambda: row.forecast(m, p, seed, data.val_end, test_idx),
                                data, test_idx)
        out.records.append({"seed": s, "val_rmse": val_rmse, "test_rmse": met["rmse"],
                            "test_mape": met["mape"], "test_nrmse": met["nrmse"],
                            "train_time_s": dt, "n_params": m.n_params})
    return out


def _table2_gated(spec, cfg, data):
    view = _View(data, spec.interp)
    ser = view.series
    k_tr, k_val = view.end(data.train_end), view.end(data.val_end)
    out = RunResult(spec.key, params={"n_hidden": cfg.option("gru_hidden", 30),
                                      "epochs": cfg.option("epochs", 100)})
    val_idx = slice(data.train_end, data.val_end)
    test_idx = slice(data.val_end, data.val_end + data.n_test)
    for s in cfg.seeds:
        est = GRUForecaster(variant=spec.variant, n_hidden=cfg.option("gru_hidden", 30),
                            epochs=cfg.option("epochs", 100), batch_size=cfg.option("batch_size", 32),
                            lr=cfg.option("lr", 1e-3), window=cfg.option("window", 50),
                            stride=cfg.option("stride", 10), washout=cfg.option("gru_washout", 10),
                            time_transform=spec.transform or "linear",
                            time_scale=cfg.option("exp_scale", 1.0), random_state=spawn_seed(s, 0))
        t0 = time.perf_counter()
        est.fit(ser[:k_tr], val_series=ser[k_tr:k_val])
        dt = time.perf_counter() - t0
        rec = {"seed": s, "train_time_s": dt, "n_params": est.model_.n_params}
        for name, k, idx in (("val", k_tr, val_idx), ("test", k_val, test_idx)):
            q = data.series.timestamps[idx]

            def gen(k=k, q=q):
                with np.errstate(over="ignore", invalid="ignore"):
                    out = gated_generate(est.model_, ser[:k], view.horizon(k, q))
                return view.to_queries(k, out, q)

            met = _forecast_metrics(gen, data, idx)
            if name == "val":
                rec["val_rmse"] = met["rmse"]
            else:
                rec.update(test_rmse=met["rmse"], test_mape=met["mape"], test_nrmse=met["nrmse"])
        out.records.append(rec)
    return out


def run_table2(cfg: ExperimentConfig, data: PredictionData | None = None) -> TableResult:
    """Generative prediction on a timestamped univariate series.

    Every row forecasts the validation and test windows closed-loop; RMSE
    and MAPE are in the units of the original series.
    """
    data = prepare_prediction(cfg) if data is None else data
    rows = select_rows(TABLE2_ROWS, cfg.option("rows", None))
    result = TableResult(config=cfg.to_dict())
    for spec in rows:
        t0 = time.perf_counter()
        run = (_table2_reservoir if spec.family == "reservoir" else _table2_gated)(spec, cfg, data)
        run.runtime_s = time.perf_counter() - t0
        run.extra.update(f_dt=spec.transform or "--", validation=spec.validation,
                         label=spec.name)
        log.info("%s: test RMSE %.4f", spec.key, run.aggregate("test_rmse")["mean"])
        result.rows.append(run)
    return result


def table2_rows(result: TableResult) -> list:
    out = []
    for run in result.rows:
        row = {"model": run.extra.get("label", run.name), "key": run.name}
        for m in ("val_rmse", "test_rmse", "test_mape"):
            a = run.aggregate(m)
            row[f"{m}_mean"], row[f"{m}_std"] = a["mean"], a["std"]
        row.update(f_dt=run.extra.get("f_dt", "--"), validation=run.extra.get("validation"),
                   n_seeds=len(run.records))
        out.append(row)
    return out
