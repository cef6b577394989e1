"""Command-line entry point.

Every subcommand writes into an output directory and leaves a
``metadata.json`` there with the resolved configuration, seeds, library
versions and wall-clock time.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
import sklearn

from .. import __version__
from ..datagen import (LorenzConfig, MackeyGlassConfig, generate_lorenz, generate_mackey_glass,
                       irregularize_mg)
from ..datasets import load_timestamped_csv, split_indices, synthetic_speleothem
from ..gated import GRUClassifier, GRUForecaster, GatedModel, gated_generate
from ..io import load_model, read_series_csv, save_model, write_series_csv
from ..reservoir import ReservoirModel, init_reservoir, run_generative, train_readout
from ..series import SampledSeries
from ..timegrid import TimeTransform
from .config import ConfigError, ExperimentConfig
from .metrics import accuracy, evaluate_metrics
from .sweep import SweepSettings, make_sweep_data, run_sweep, tune_at_regular
from .tables import (TABLE1_ROWS, TABLE2_ROWS, RowSpec, _esn_accuracy, _esn_classifier, _labels,
                     prepare_prediction, prepare_uwave, run_table1, run_table2, select_rows,
                     table1_rows, table2_rows, tune_table1_row, tune_table2_row)

log = logging.getLogger("timeadaptive")


# --- output helpers ---------------------------------------------------------

def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def write_csv(rows, path, columns=None) -> Path:
    """Rows of dicts to CSV; floats keep 17 significant digits."""
    path = Path(path)
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
    return path


def write_metadata(out: Path, command: str, config: dict, seeds, started: float, extra=None) -> Path:
    meta = {
        "command": command,
        "argv": sys.argv,
        "config": config,
        "seeds": list(seeds),
        "versions": {"timeadaptive": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "scikit-learn": sklearn.__version__},
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "runtime_s": time.time() - started,
    }
    if extra:
        meta.update(extra)
    return write_json(meta, out / "metadata.json")


def _load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_json(path)


def _load_series(path) -> SampledSeries:
    try:
        return read_series_csv(path)
    except ValueError:
        return load_timestamped_csv(path)


# --- subcommands --------------------------------------------------------------

def cmd_generate(args, out: Path, started):
    if args.system == "lorenz":
        cfg = LorenzConfig(n_steps=args.n_steps or 10_000, pi=args.pi, seed=args.seed)
        series = generate_lorenz(cfg)
        conf = asdict(cfg)
    elif args.system == "mg":
        n = args.n_steps or 5000
        mg = MackeyGlassConfig(n_steps=int(math.ceil((n + 2) * (1 + args.pi) / 0.01)) + 2)
        series = irregularize_mg(generate_mackey_glass(mg), args.pi, args.seed, n_points=n)
        conf = dict(asdict(mg), n_points=n, pi=args.pi, seed=args.seed)
    else:
        series = synthetic_speleothem(args.n_steps or 1800, args.seed)
        conf = {"n": len(series), "seed": args.seed}
    write_series_csv(series, out / "series.csv")
    write_metadata(out, "generate", {"system": args.system, **conf}, [args.seed], started)


def cmd_sweep(args, out, started):
    cfg = _load_config(args.config)
    params = json.loads(Path(args.params).read_text()) if args.params else None
    res = run_sweep(cfg, params)
    write_csv(res.summary, out / "sweep_summary.csv")
    write_csv(res.rows, out / "sweep_runs.csv")
    if res.tuning is not None:
        write_csv(res.tuning.table, out / "grid.csv")
    write_metadata(out, "sweep", cfg.to_dict(), cfg.seeds, started,
                   {"settings": res.settings, "params": res.params})


def cmd_gridsearch(args, out, started):
    cfg = _load_config(args.config)
    if cfg.task in ("lorenz_sweep", "mg_sweep"):
        res = tune_at_regular(SweepSettings.from_experiment(cfg), cfg.grid)
        row = cfg.task
    elif cfg.task == "predict":
        spec = select_rows(TABLE2_ROWS, [cfg.option("row", "TAESN-exp-CV")])[0]
        if spec.family != "reservoir":
            raise ConfigError("grid search applies to reservoir rows")
        res = tune_table2_row(spec, cfg, prepare_prediction(cfg))
        row = spec.key
    else:
        spec = select_rows(TABLE1_ROWS, [cfg.option("row", "TAESN-exp")])[0]
        if spec.family != "reservoir":
            raise ConfigError("grid search applies to reservoir rows")
        train, val, _ = prepare_uwave(cfg)
        res = tune_table1_row(spec, cfg, train, val)
        row = spec.key
    write_csv(res.table, out / "grid.csv")
    write_json(res.best_params, out / "best_params.json")
    write_metadata(out, "gridsearch", cfg.to_dict(), cfg.seeds, started,
                   {"row": row, "best_params": res.best_params, "best_score": res.best_score})


def _forecast_data(cfg: ExperimentConfig) -> SampledSeries:
    d = cfg.data
    if d.get("csv"):
        return _load_series(d["csv"])
    if cfg.task == "lorenz_sweep":
        return generate_lorenz(LorenzConfig(n_steps=d.get("n_steps", 10_000), pi=d.get("pi", 0.0),
                                            seed=d.get("seed", 0)))
    if cfg.task == "mg_sweep":
        s = SweepSettings.from_experiment(cfg)
        return make_sweep_data(s, d.get("pi", 0.0))
    return synthetic_speleothem(d.get("n", 1800), d.get("seed", 0))


def cmd_train(args, out, started):
    cfg = _load_config(args.config)
    seed = cfg.seeds[0]
    o = cfg.options
    info = {}
    if cfg.task == "classify":
        train, val, _ = prepare_uwave(cfg)
        if cfg.family == "reservoir":
            spec = RowSpec(cfg.variant.upper(), "reservoir", cfg.variant,
                           None if cfg.variant == "esn" else cfg.transform)
            params = {"alpha": o.get("alpha", 0.5), "radius": o.get("radius", 0.9),
                      "lambda": o.get("lambda", 1e-6), "input_scaling": o.get("input_scaling", 1.0)}
            deltas = np.concatenate([s.deltas for s in train])
            model = _esn_classifier(spec, train, params, seed, cfg, deltas)
            info["val_accuracy"] = _esn_accuracy(model, val)
        else:
            clf = GRUClassifier(variant=cfg.variant, n_hidden=o.get("n_hidden", 100),
                                epochs=o.get("epochs", 100), time_transform=cfg.transform,
                                time_scale=o.get("exp_scale", 1.0), random_state=seed)
            clf.fit(train, _labels(train), X_val=val, y_val=_labels(val))
            model = clf.model_
            write_csv(clf.history_, out / "history.csv")
            info["val_accuracy"] = accuracy(clf.predict(val), _labels(val))
    else:
        series = _forecast_data(cfg)
        n_train = o.get("n_train") or len(split_indices(len(series), (0.6, 0.2, 0.2))[0])
        train = series[:n_train]
        if cfg.family == "reservoir":
            tf = None
            if cfg.variant != "esn":
                tf = TimeTransform(kind=cfg.transform, scale=o.get("exp_scale", 1.0),
                                   clip=o.get("clip", 1.0)).fit(train.deltas)
            model = init_reservoir(cfg.variant, o.get("n_units", 500), series.n_dims,
                                   o.get("alpha", 0.5), o.get("radius", 0.9),
                                   o.get("input_scaling", 1.0), tf, o.get("readout_input", True),
                                   rng=seed)
            model = train_readout(model, train, lam=o.get("lambda", 1e-6),
                                  washout=o.get("washout", 100))
            info["train_rmse"] = model.info["train_rmse"]
        else:
            est = GRUForecaster(variant=cfg.variant, n_hidden=o.get("n_hidden", 30),
                                epochs=o.get("epochs", 100), time_transform=cfg.transform,
                                time_scale=o.get("exp_scale", 1.0), random_state=seed)
            est.fit(train)
            model = est.model_
            write_csv(est.history_, out / "history.csv")
        info["n_train"] = n_train
    save_model(model, out / "model.npz")
    write_metadata(out, "train", cfg.to_dict(), cfg.seeds, started,
                   {"n_params": model.n_params, **info})


def cmd_eval(args, out, started):
    model = load_model(args.model)
    series = _load_series(args.data)
    prime = args.prime
    if not 1 <= prime < len(series):
        raise ValueError(f"--prime must lie in [1, {len(series) - 1}]")
    primer, rest = series[:prime], series[prime - 1:]
    horizon = rest.deltas[: args.horizon] if args.horizon else rest.deltas
    if isinstance(model, ReservoirModel):
        pred = run_generative(model, primer, horizon)
    elif isinstance(model, GatedModel):
        pred = gated_generate(model, primer, horizon)
    else:  # pragma: no cover - load_model only returns the two
        raise TypeError(type(model).__name__)
    truth = series.values[prime:prime + len(horizon)]
    with np.errstate(over="ignore", invalid="ignore"):
        met = evaluate_metrics(pred.values, truth)
    write_series_csv(pred, out / "predictions.csv")
    write_json(met, out / "metrics.json")
    write_metadata(out, "eval", {"model": str(args.model), "data": str(args.data),
                                 "prime": prime, "horizon": len(horizon)}, [], started,
                   {"metrics": met})


def _seed_rows(result, keys):
    rows = []
    for run in result.rows:
        for r in run.records:
            rows.append({"model": run.name, **{k: r.get(k) for k in keys}})
    return rows


def cmd_table1(args, out, started):
    cfg = _load_config(args.config)
    res = run_table1(cfg)
    write_csv(table1_rows(res), out / "table1.csv")
    write_csv(_seed_rows(res, ["seed", "accuracy", "val_accuracy", "train_time_s", "n_params"]),
              out / "table1_seeds.csv")
    write_metadata(out, "table1", cfg.to_dict(), cfg.seeds, started,
                   {"chosen": {r.name: r.params for r in res.rows}})


def cmd_table2(args, out, started):
    cfg = _load_config(args.config)
    res = run_table2(cfg)
    write_csv(table2_rows(res), out / "table2.csv")
    write_csv(_seed_rows(res, ["seed", "val_rmse", "test_rmse", "test_mape", "test_nrmse",
                               "train_time_s", "n_params"]), out / "table2_seeds.csv")
    write_metadata(out, "table2", cfg.to_dict(), cfg.seeds, started,
                   {"chosen": {r.name: r.params for r in res.rows}})


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="timeadaptive", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic series as CSV")
    g.add_argument("system", choices=["lorenz", "mg", "speleothem"])
    g.add_argument("--n-steps", type=int, default=None)
    g.add_argument("--pi", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sweep", help="irregularity sweep (tunes at pi=0 unless --params)")
    s.add_argument("--config", required=True)
    s.add_argument("--params", help="JSON file with fixed hyperparameters")
    s.set_defaults(func=cmd_sweep)

    gs = sub.add_parser("gridsearch", help="hyperparameter grid search")
    gs.add_argument("--config", required=True)
    gs.set_defaults(func=cmd_gridsearch)

    t = sub.add_parser("train", help="train one model and save it")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="closed-loop evaluation of a saved forecaster")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--prime", type=int, required=True, help="observations used for priming")
    e.add_argument("--horizon", type=int, default=None)
    e.set_defaults(func=cmd_eval)

    for name, fn in (("table1", cmd_table1), ("table2", cmd_table2)):
        tp = sub.add_parser(name, help=f"reproduce {name}")
        tp.add_argument("--config", required=True)
        tp.set_defaults(func=fn)

    for sp in sub.choices.values():
        sp.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        args.func(args, out, started)
    except (OSError, ValueError, RuntimeError, ArithmeticError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
