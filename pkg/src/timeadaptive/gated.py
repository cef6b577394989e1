"""Gated recurrent units: regular, step-as-input and time-adaptive.

For all variants

    z = sigmoid(W_z [1; x] + U_z h)
    r = sigmoid(W_r [1; x] + U_r h)
    c = tanh(W_h [1; x] + U_h (r * h))
    h' = (1 - g) * h + g * c,    y = W_out [1; h']

with gate ``g = z`` for ``gru`` and ``grut`` and ``g = dt * z`` for
``tagru``. ``grut`` appends the step to ``x``. The step is a constant input,
never differentiated. Training is full backpropagation through time.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit, log_softmax, softmax
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_series, as_series_list, check_n_dims
from .numerics import make_rng
from .series import SampledSeries
from .timegrid import TimeTransform

__all__ = [
    "VARIANTS",
    "PARAM_NAMES",
    "GatedModel",
    "TrainConfig",
    "init_gated",
    "gated_step",
    "forward",
    "backward",
    "loss_and_grad",
    "train",
    "write_history_csv",
    "GRUClassifier",
    "GRUForecaster",
]

log = logging.getLogger(__name__)

VARIANTS = ("gru", "grut", "tagru")
PARAM_NAMES = ("Wz", "Uz", "Wr", "Ur", "Wh", "Uh", "W_out")


@dataclass(frozen=True, eq=False)
class GatedModel:
    variant: str
    Wz: np.ndarray
    Uz: np.ndarray
    Wr: np.ndarray
    Ur: np.ndarray
    Wh: np.ndarray
    Uh: np.ndarray
    W_out: np.ndarray
    n_in: int
    transform: TimeTransform | None = None
    raw_dt_input: bool = False
    info: dict = field(default_factory=dict)

    @property
    def n_hidden(self) -> int:
        return self.Uz.shape[0]

    @property
    def n_out(self) -> int:
        return self.W_out.shape[0]

    @property
    def n_model_in(self) -> int:
        return self.n_in + (self.variant == "grut")

    @property
    def n_params(self) -> int:
        return int(sum(getattr(self, k).size for k in PARAM_NAMES))

    def params(self) -> dict:
        return {k: getattr(self, k) for k in PARAM_NAMES}

    def with_params(self, params: dict) -> "GatedModel":
        return replace(self, **{k: np.array(params[k]) for k in PARAM_NAMES})


def init_gated(variant="tagru", n_hidden=100, n_in=1, n_out=1, transform=None,
               raw_dt_input=False, rng=0) -> GatedModel:
    """Uniform ``(-k, k)`` weights with ``k = 1/sqrt(fan_in)`` per matrix."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if min(n_hidden, n_in, n_out) < 1:
        raise ValueError("sizes must be >= 1")
    if variant != "gru" and transform is None:
        raise ValueError(f"variant {variant!r} needs a time transform")
    rng = make_rng(rng)
    n_x = n_in + (variant == "grut") + 1

    def draw(rows, cols):
        k = 1.0 / np.sqrt(cols)
        return rng.uniform(-k, k, size=(rows, cols))

    H = n_hidden
    return GatedModel(variant=variant,
                      Wz=draw(H, n_x), Uz=draw(H, H),
                      Wr=draw(H, n_x), Ur=draw(H, H),
                      Wh=draw(H, n_x), Uh=draw(H, H),
                      W_out=draw(n_out, H + 1),
                      n_in=int(n_in), transform=transform, raw_dt_input=raw_dt_input)


def _with_bias(model: GatedModel, X, dt_eff, dt_raw=None):
    """``[1; x]`` (plus the step column for grut), shape ``(B, T, n_x)``."""
    B, T, _ = X.shape
    cols = [np.ones((B, T, 1)), X]
    if model.variant == "grut":
        d = dt_raw if (model.raw_dt_input and dt_raw is not None) else dt_eff
        cols.append(np.asarray(d, dtype=np.float64)[..., None])
    return np.concatenate(cols, axis=-1)


def _gate_dt(model, dt_eff):
    if model.variant != "tagru":
        return None
    d = np.asarray(dt_eff, dtype=np.float64)
    if np.any(d < 0) or np.any(d > 1 + 1e-12):
        raise ValueError("time-adaptive steps must lie in [0, 1]")
    return d


def gated_step(model: GatedModel, h_prev, x, dt_effective=1.0):
    """Single update; returns ``(h_next, {"z", "r", "candidate"})``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[-1] != model.n_in:
        raise ValueError(f"expected {model.n_in} inputs, got {x.shape[-1]}")
    h_prev = np.asarray(h_prev, dtype=np.float64)
    xb = np.concatenate([[1.0], x] + ([[dt_effective]] if model.variant == "grut" else []))
    z = expit(model.Wz @ xb + model.Uz @ h_prev)
    r = expit(model.Wr @ xb + model.Ur @ h_prev)
    c = np.tanh(model.Wh @ xb + model.Uh @ (r * h_prev))
    g = z * _gate_dt(model, dt_effective) if model.variant == "tagru" else z
    h = (1.0 - g) * h_prev + g * c
    return h, {"z": z, "r": r, "candidate": c}


def forward(model: GatedModel, X, dt_effective=None, h0=None, dt_raw=None):
    """Run a batch ``X`` of shape ``(B, T, n_in)`` (or ``(T, n_in)``).

    Returns ``(Y, cache)`` with outputs ``Y`` of shape ``(B, T, n_out)``.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    B, T, n_in = X.shape
    if n_in != model.n_in:
        raise ValueError(f"expected {model.n_in} inputs, got {n_in}")
    dt = np.ones((B, T)) if dt_effective is None else np.asarray(dt_effective, dtype=np.float64).reshape(B, T)
    if dt_raw is not None:
        dt_raw = np.asarray(dt_raw, dtype=np.float64).reshape(B, T)
    gdt = _gate_dt(model, dt)
    Xb = _with_bias(model, X, dt, dt_raw)
    Hd = model.n_hidden
    pz = Xb @ model.Wz.T
    pr = Xb @ model.Wr.T
    ph = Xb @ model.Wh.T
    Hs = np.empty((B, T + 1, Hd))
    Hs[:, 0] = 0.0 if h0 is None else h0
    Z = np.empty((B, T, Hd))
    R = np.empty_like(Z)
    C = np.empty_like(Z)
    UzT, UrT, UhT = model.Uz.T, model.Ur.T, model.Uh.T
    for t in range(T):
        h = Hs[:, t]
        z = expit(pz[:, t] + h @ UzT)
        r = expit(pr[:, t] + h @ UrT)
        c = np.tanh(ph[:, t] + (r * h) @ UhT)
        g = z * gdt[:, t, None] if gdt is not None else z
        Hs[:, t + 1] = h + g * (c - h)
        Z[:, t], R[:, t], C[:, t] = z, r, c
    Y = Hs[:, 1:] @ model.W_out[:, 1:].T + model.W_out[:, 0]
    cache = {"Xb": Xb, "H": Hs, "Z": Z, "R": R, "C": C, "gdt": gdt, "single": single,
             "id": id(model)}
    return (Y[0] if single else Y), cache


def backward(model: GatedModel, cache: dict, dY) -> dict:
    """Reverse-mode gradients of a loss with output gradient ``dY``."""
    if cache.get("id") != id(model):
        raise ValueError("cache was produced by a different model")
    dY = np.asarray(dY, dtype=np.float64)
    if cache["single"]:
        dY = dY[None]
    Xb, Hs, Z, R, C, gdt = (cache[k] for k in ("Xb", "H", "Z", "R", "C", "gdt"))
    B, T, Hd = Z.shape
    grads = {k: np.zeros_like(v) for k, v in model.params().items()}
    Hout = Hs[:, 1:]
    grads["W_out"][:, 0] = dY.sum(axis=(0, 1))
    grads["W_out"][:, 1:] = np.einsum("bto,bth->oh", dY, Hout)
    dHout = dY @ model.W_out[:, 1:]
    daz = np.empty((B, T, Hd))
    dar = np.empty_like(daz)
    dac = np.empty_like(daz)
    Uz, Ur, Uh = model.Uz, model.Ur, model.Uh
    dh = np.zeros((B, Hd))
    for t in range(T - 1, -1, -1):
        dh = dh + dHout[:, t]
        hp, z, r, c = Hs[:, t], Z[:, t], R[:, t], C[:, t]
        if gdt is not None:
            d = gdt[:, t, None]
            g = d * z
        else:
            g = z
        dg = dh * (c - hp)
        dc = dh * g
        dhp = dh * (1.0 - g)
        dz = dg * d if gdt is not None else dg
        a_c = dc * (1.0 - c * c)
        drh = a_c @ Uh
        dr = drh * hp
        dhp += drh * r
        a_z = dz * z * (1.0 - z)
        a_r = dr * r * (1.0 - r)
        dhp += a_z @ Uz + a_r @ Ur
        daz[:, t], dar[:, t], dac[:, t] = a_z, a_r, a_c
        dh = dhp
    Hprev = Hs[:, :-1]
    grads["Uz"] = np.einsum("bti,btj->ij", daz, Hprev)
    grads["Ur"] = np.einsum("bti,btj->ij", dar, Hprev)
    grads["Uh"] = np.einsum("bti,btj->ij", dac, R * Hprev)
    grads["Wz"] = np.einsum("bti,btj->ij", daz, Xb)
    grads["Wr"] = np.einsum("bti,btj->ij", dar, Xb)
    grads["Wh"] = np.einsum("bti,btj->ij", dac, Xb)
    return grads


def _loss_grad_outputs(Y, target, task, washout=0):
    if task == "classify":
        labels = np.asarray(target, dtype=int)
        B = len(labels)
        logits = Y[:, -1]
        lp = log_softmax(logits, axis=1)
        loss = -lp[np.arange(B), labels].mean()
        dY = np.zeros_like(Y)
        p = softmax(logits, axis=1)
        p[np.arange(B), labels] -= 1.0
        dY[:, -1] = p / B
        return loss, dY
    if task == "regress":
        T = np.asarray(target, dtype=np.float64)
        err = np.zeros_like(Y)
        err[:, washout:] = Y[:, washout:] - T[:, washout:]
        n = err[:, washout:].size
        loss = float(np.sum(err * err) / n)
        return loss, 2.0 * err / n
    raise ValueError(f"unknown task {task!r}")


def loss_and_grad(model: GatedModel, X, dt_effective, target, task="classify", washout=0,
                  dt_raw=None):
    """Mean cross-entropy on final-step logits, or mean squared error per step."""
    Y, cache = forward(model, np.asarray(X, dtype=np.float64), dt_effective, dt_raw=dt_raw)
    if cache["single"]:
        Y = Y[None]
        target = np.asarray(target)[None]
    loss, dY = _loss_grad_outputs(Y, target, task, washout)
    if cache["single"]:
        dY = dY[0]
    return loss, backward(model, cache, dY)


@dataclass
class TrainConfig:
    task: str = "classify"
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 5.0
    washout: int = 0
    seed: int = 0


@dataclass
class TrainState:
    params: dict
    m: dict
    v: dict
    epoch: int = 0
    best_loss: float = np.inf
    best_params: dict | None = None


def _adam_update(state: TrainState, grads: dict, cfg: TrainConfig, t: int):
    b1, b2 = cfg.beta1, cfg.beta2
    for k, g in grads.items():
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * g * g
        mhat = state.m[k] / (1 - b1 ** t)
        vhat = state.v[k] / (1 - b2 ** t)
        state.params[k] = state.params[k] - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)


def _clip(grads: dict, max_norm):
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
    if max_norm is not None and norm > max_norm:
        s = max_norm / norm
        grads = {k: g * s for k, g in grads.items()}
    return grads, norm


def _eval(model, data, cfg, washout):
    X, dt, target, raw = data
    Y, _ = forward(model, X, dt, dt_raw=raw)
    loss, _ = _loss_grad_outputs(Y, target, cfg.task, washout)
    if cfg.task == "classify":
        metric = float(np.mean(np.argmax(Y[:, -1], axis=1) == np.asarray(target)))
    else:
        metric = float(np.sqrt(loss))
    return float(loss), metric


def train(model: GatedModel, train_data, val_data, cfg: TrainConfig = TrainConfig(),
          val_washout: int | None = None):
    """Mini-batch Adam with global-norm clipping; keeps the best-validation snapshot.

    ``train_data`` and ``val_data`` are tuples ``(X, dt_effective, target)``
    or ``(X, dt_effective, target, dt_raw)`` with ``X`` of shape
    ``(N, T, n_in)``. Returns ``(best_model, history)`` where ``history`` is a
    list of per-epoch dicts. ``val_washout`` (default ``cfg.washout``) is
    the number of leading validation steps left out of the validation loss.
    """
    if val_washout is None:
        val_washout = cfg.washout
    train_data = tuple(train_data) + (None,) * (4 - len(train_data))
    val_data = tuple(val_data) + (None,) * (4 - len(val_data))
    X, dt, target, raw = train_data
    N = len(X)
    if N == 0 or len(val_data[0]) == 0:
        raise ValueError("training and validation sets must be non-empty")
    rng = make_rng(cfg.seed)
    params = {k: v.copy() for k, v in model.params().items()}
    state = TrainState(params=params, m={k: np.zeros_like(v) for k, v in params.items()},
                       v={k: np.zeros_like(v) for k, v in params.items()})
    val_loss, val_metric = _eval(model, val_data, cfg, val_washout)
    state.best_loss, state.best_params = val_loss, {k: v.copy() for k, v in params.items()}
    history = []
    t = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(N)
        total, seen = 0.0, 0
        for s in range(0, N, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            cur = model.with_params(state.params)
            loss, grads = loss_and_grad(cur, X[idx], dt[idx], np.asarray(target)[idx], cfg.task,
                                        cfg.washout, None if raw is None else raw[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss at epoch {epoch}, batch {s // cfg.batch_size}")
            grads, gnorm = _clip(grads, cfg.clip_norm)
            t += 1
            _adam_update(state, grads, cfg, t)
            total += loss * len(idx)
            seen += len(idx)
        state.epoch = epoch
        cur = model.with_params(state.params)
        val_loss, val_metric = _eval(cur, val_data, cfg, val_washout)
        if not np.isfinite(val_loss):
            raise FloatingPointError(f"non-finite validation loss at epoch {epoch}")
        if val_loss < state.best_loss:
            state.best_loss = val_loss
            state.best_params = {k: v.copy() for k, v in state.params.items()}
        history.append({"epoch": epoch, "train_loss": total / seen, "val_loss": val_loss,
                        "val_metric": val_metric})
        log.debug("epoch %d train %.5f val %.5f metric %.4f", epoch, total / seen, val_loss, val_metric)
    best = model.with_params(state.best_params)
    best = replace(best, info=dict(model.info, best_val_loss=state.best_loss, epochs=cfg.epochs,
                                   lr=cfg.lr, batch_size=cfg.batch_size, clip_norm=cfg.clip_norm,
                                   optimizer="adam"))
    return best, history


def write_history_csv(history, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_loss", "val_metric"])
        w.writeheader()
        w.writerows(history)
    return path


# --- sequence preparation -------------------------------------------------

def _first_raw(tf):
    return 1.0 if tf is None else tf.norm_constant_


def classification_arrays(model: GatedModel, seqs):
    """Aligned inputs and steps; the first step of each sequence is a full step."""
    lengths = {len(s) for s in seqs}
    if len(lengths) > 1:
        raise ValueError(f"gated classification needs equal-length sequences, got lengths {sorted(lengths)}")
    X = np.stack([s.values for s in seqs])
    raw = np.stack([np.concatenate([[_first_raw(model.transform)], s.deltas]) for s in seqs])
    dt = np.ones_like(raw)
    if model.transform is not None:
        dt[:, 1:] = model.transform.transform(raw[:, 1:])
    return X, dt, raw


def forecast_arrays(model: GatedModel, series: SampledSeries):
    """Shifted inputs ``x_{n-1}`` and steps ``t_n - t_{n-1}``, targets ``x_n``."""
    raw = series.deltas
    dt = np.ones_like(raw) if model.transform is None else model.transform.transform(raw)
    return series.values[:-1], dt, series.values[1:], raw


# --- estimator front-ends -------------------------------------------------

class _GatedParams(BaseEstimator):
    def _transform(self, deltas):
        if self.variant == "gru":
            return None
        tf = TimeTransform(kind=self.time_transform, scale=self.time_scale, clip=self.time_clip)
        d = np.asarray(deltas, dtype=np.float64)
        return tf.fit(d if d.size else np.ones(1))

    def _config(self, task, washout=0):
        return TrainConfig(task=task, epochs=self.epochs, batch_size=self.batch_size,
                           lr=self.lr, clip_norm=self.clip_norm, washout=washout,
                           seed=self.random_state)


class GRUClassifier(ClassifierMixin, _GatedParams):
    """Sequence classifier reading logits off the final hidden state.

    If no validation set is passed to :meth:`fit`, ``validation_fraction``
    of the training sequences is held out (seeded) for snapshot selection.
    """

    def __init__(self, variant="tagru", n_hidden=100, epochs=100, batch_size=32, lr=1e-3,
                 clip_norm=5.0, validation_fraction=0.3, time_transform="linear",
                 time_scale=1.0, time_clip=1.0, raw_dt_input=False, random_state=0):
        self.variant = variant
        self.n_hidden = n_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.clip_norm = clip_norm
        self.validation_fraction = validation_fraction
        self.time_transform = time_transform
        self.time_scale = time_scale
        self.time_clip = time_clip
        self.raw_dt_input = raw_dt_input
        self.random_state = random_state

    def fit(self, X, y, times=None, X_val=None, y_val=None, times_val=None):
        seqs = as_series_list(X, times)
        n_in = seqs[0].n_dims
        check_n_dims(seqs, n_in)
        y = np.asarray(y)
        if X_val is None:
            rng = make_rng(self.random_state)
            perm = rng.permutation(len(seqs))
            n_val = max(1, int(round(self.validation_fraction * len(seqs))))
            val_idx, tr_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
            val = [seqs[i] for i in val_idx], y[val_idx]
            seqs, y = [seqs[i] for i in tr_idx], y[tr_idx]
        else:
            val = as_series_list(X_val, times_val), np.asarray(y_val)
        self.classes_ = np.unique(np.concatenate([y, val[1]]))
        enc = {c: i for i, c in enumerate(self.classes_)}
        tf = self._transform(np.concatenate([s.deltas for s in seqs]))
        model = init_gated(self.variant, self.n_hidden, n_in, len(self.classes_), tf,
                           self.raw_dt_input, rng=self.random_state)
        Xt, dtt, rawt = classification_arrays(model, seqs)
        Xv, dtv, rawv = classification_arrays(model, val[0])
        self.model_, self.history_ = train(
            model, (Xt, dtt, np.array([enc[c] for c in y]), rawt),
            (Xv, dtv, np.array([enc[c] for c in val[1]]), rawv), self._config("classify"))
        self.n_features_in_ = n_in
        return self

    def decision_function(self, X, times=None):
        check_is_fitted(self, "model_")
        seqs = as_series_list(X, times)
        check_n_dims(seqs, self.n_features_in_)
        out = np.empty((len(seqs), len(self.classes_)))
        by_len: dict[int, list[int]] = {}
        for i, s in enumerate(seqs):
            by_len.setdefault(len(s), []).append(i)
        for idx in by_len.values():
            Xa, dt, raw = classification_arrays(self.model_, [seqs[i] for i in idx])
            Y, _ = forward(self.model_, Xa, dt, dt_raw=raw)
            out[idx] = Y[:, -1]
        return out

    def predict(self, X, times=None):
        return self.classes_[np.argmax(self.decision_function(X, times), axis=1)]


def _windows(arrs, length, stride):
    n = len(arrs[0])
    starts = range(0, max(n - length, 0) + 1, stride)
    return tuple(np.stack([a[s:s + length] for s in starts]) for a in arrs)


class GRUForecaster(RegressorMixin, _GatedParams):
    """One-step-ahead GRU forecaster trained on windows of a single series.

    The last ``validation_length`` observations of the training series are
    held out for snapshot selection unless a validation series is passed.
    """

    def __init__(self, variant="tagru", n_hidden=30, epochs=100, batch_size=32, lr=1e-3,
                 clip_norm=5.0, window=50, stride=10, washout=10, validation_length=50,
                 time_transform="linear", time_scale=1.0, time_clip=1.0, raw_dt_input=False,
                 random_state=0):
        self.variant = variant
        self.n_hidden = n_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.clip_norm = clip_norm
        self.window = window
        self.stride = stride
        self.washout = washout
        self.validation_length = validation_length
        self.time_transform = time_transform
        self.time_scale = time_scale
        self.time_clip = time_clip
        self.raw_dt_input = raw_dt_input
        self.random_state = random_state

    def fit(self, X, y=None, times=None, val_series=None):
        series = as_series(X, times)
        if val_series is None:
            cut = len(series) - self.validation_length
            train_s, context = series[:cut], series
            val_start = cut - 1
        else:
            train_s, context = series, _concat(series, val_series)
            val_start = len(series) - 1
        tf = self._transform(train_s.deltas)
        model = init_gated(self.variant, self.n_hidden, series.n_dims, series.n_dims, tf,
                           self.raw_dt_input, rng=self.random_state)
        Xs, dt, Ys, raw = forecast_arrays(model, train_s)
        train_w = _windows((Xs, dt, Ys, raw), self.window, self.stride)
        Xc, dtc, Yc, rawc = forecast_arrays(model, context)
        # validation runs over the whole context and scores only the held-out tail
        val = (Xc[None], dtc[None], Yc[None], rawc[None])
        self.model_, self.history_ = train(model, train_w, val, self._config("regress", self.washout),
                                           val_washout=val_start)
        self.n_features_in_ = series.n_dims
        return self

    def predict(self, X, times=None):
        """Teacher-forced one-step predictions for rows ``1..N-1``."""
        check_is_fitted(self, "model_")
        series = as_series(X, times)
        Xs, dt, _, raw = forecast_arrays(self.model_, series)
        Y, _ = forward(self.model_, Xs, dt, dt_raw=raw)
        return Y

    def forecast(self, primer, deltas, times=None) -> SampledSeries:
        """Closed-loop prediction after teacher-forcing ``primer``."""
        check_is_fitted(self, "model_")
        return gated_generate(self.model_, as_series(primer, times), deltas)


def _concat(a: SampledSeries, b: SampledSeries) -> SampledSeries:
    return SampledSeries(np.concatenate([a.timestamps, b.timestamps]),
                         np.concatenate([a.values, b.values]))


def gated_generate(model: GatedModel, primer: SampledSeries, horizon_deltas) -> SampledSeries:
    """Teacher-force ``primer`` then feed predictions back over ``horizon_deltas``."""
    if model.n_out != model.n_in:
        raise ValueError("closed-loop generation needs n_out == n_in")
    deltas = np.asarray(horizon_deltas, dtype=np.float64).ravel()
    h = np.zeros(model.n_hidden)
    if len(primer) > 1:
        Xs, dt, _, raw = forecast_arrays(model, primer)
        _, cache = forward(model, Xs, dt, dt_raw=raw)
        h = cache["H"][0, -1]
    x = primer.values[-1]
    preds = np.empty((len(deltas), model.n_in))
    dt_eff = np.ones_like(deltas) if model.transform is None else model.transform.transform(deltas)
    step_in = deltas if (model.variant == "grut" and model.raw_dt_input) else dt_eff
    for k in range(len(deltas)):
        h, _ = gated_step(model, h, x, step_in[k])
        x = model.W_out[:, 0] + model.W_out[:, 1:] @ h
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"closed-loop generation diverged at step {k}")
        preds[k] = x
    return SampledSeries(primer.timestamps[-1] + np.cumsum(deltas), preds)
