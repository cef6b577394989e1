"""CSV series files and versioned model files."""

from __future__ import annotations

import csv
import json
from dataclasses import fields
from pathlib import Path

import numpy as np

from .series import SampledSeries
from .timegrid import TimeTransform

FORMAT_VERSION = 1
_MAGIC = "timeadaptive-model"


def write_series_csv(series: SampledSeries, path, label_sidecar: bool = True) -> Path:
    """Write ``t,x0[,x1,...]`` rows with 17 significant digits."""
    path = Path(path)
    header = ["t"] + [f"x{i}" for i in range(series.n_dims)]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, row in zip(series.timestamps, series.values):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])
    if label_sidecar and series.label is not None:
        path.with_suffix(path.suffix + ".json").write_text(json.dumps({"label": int(series.label)}))
    return path


def read_series_csv(path) -> SampledSeries:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip() != "t":
        raise ValueError(f"{path}: expected a header starting with 't'")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=np.float64)
    label = None
    side = path.with_suffix(path.suffix + ".json")
    if side.exists():
        label = json.loads(side.read_text()).get("label")
    return SampledSeries(data[:, 0], data[:, 1:], label=label)


def _transform_meta(tf):
    if tf is None:
        return None
    return {"kind": tf.kind, "scale": tf.scale, "clip": tf.clip, "norm_constant": tf.norm_constant_}


def _transform_from_meta(meta):
    if meta is None:
        return None
    tf = TimeTransform(kind=meta["kind"], scale=meta["scale"], clip=meta["clip"])
    tf.norm_constant_ = float(meta["norm_constant"])
    return tf


def save_model(model, path) -> Path:
    """Store a reservoir or gated model as ``.npz`` with a JSON header."""
    path = Path(path)
    arrays, scalars = {}, {}
    for f in fields(model):
        v = getattr(model, f.name)
        if isinstance(v, np.ndarray):
            arrays[f.name] = v
        elif f.name == "transform":
            scalars[f.name] = _transform_meta(v)
        else:
            scalars[f.name] = v
    header = {"magic": _MAGIC, "version": FORMAT_VERSION, "class": type(model).__name__,
              "fields": scalars, "shapes": {k: list(a.shape) for k, a in arrays.items()}}
    with path.open("wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, default=float)), **arrays)
    return path


def load_model(path):
    from .gated import GatedModel
    from .reservoir import ReservoirModel

    with np.load(Path(path), allow_pickle=False) as z:
        header = json.loads(str(z["__header__"]))
        if header.get("magic") != _MAGIC:
            raise ValueError(f"{path}: not a model file")
        if header["version"] > FORMAT_VERSION:
            raise ValueError(f"{path}: format version {header['version']} is newer than supported")
        arrays = {k: z[k] for k in z.files if k != "__header__"}
    cls = {"ReservoirModel": ReservoirModel, "GatedModel": GatedModel}[header["class"]]
    kw = dict(header["fields"])
    kw["transform"] = _transform_from_meta(kw.get("transform"))
    kw.update(arrays)
    for f in fields(cls):
        if f.name not in kw and f.default is not None:
            continue
        kw.setdefault(f.name, None)
    return cls(**kw)
