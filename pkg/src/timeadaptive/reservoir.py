"""Echo state networks with regular, time-adaptive and step-as-input updates.

All three variants share the leaky-integrator update

    h_n = (1 - a_n) h_{n-1} + a_n tanh(W_in [1; u_n] + U h_{n-1})

and differ only in ``a_n``: ``alpha`` for ``esn`` and ``esnt`` and
``alpha * f(dt_n)`` for ``taesn``. ``esnt`` additionally appends ``f(dt_n)``
to its input ``u_n``. Readouts are linear in ``[1; u_n; h_n]``.

Two alignments of inputs and steps are used:

* forecasting: the step ending at observation ``n`` consumes ``x_{n-1}``
  over ``dt_n = t_n - t_{n-1}``, so ``h_n`` lives at time ``t_n`` and its
  readout predicts ``x_n``. ``h_0 = 0``.
* classification: step ``n`` consumes ``x_n`` itself, the first step taking
  a full effective step of 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_series, as_series_list, check_n_dims
from .numerics import make_rng, ridge_solve, scale_to_radius
from .series import SampledSeries
from .timegrid import TimeTransform

__all__ = [
    "VARIANTS",
    "ReservoirModel",
    "init_reservoir",
    "step",
    "run_states",
    "step_sizes",
    "run_teacher_forced",
    "readout_features",
    "train_readout",
    "readout_from_states",
    "run_generative",
    "sequence_features",
    "train_classifier_readout",
    "classify_sequence",
    "ESNForecaster",
    "ESNClassifier",
]

VARIANTS = ("esn", "taesn", "esnt")
_STEP_TOL = 1e-12


class UntrainedModelError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ReservoirModel:
    variant: str
    alpha: float
    W_in: np.ndarray
    U: np.ndarray
    n_in: int
    radius: float
    transform: TimeTransform | None = None
    W_out: np.ndarray | None = None
    readout_input: bool = True
    info: dict = field(default_factory=dict)

    @property
    def n_units(self) -> int:
        return self.U.shape[0]

    @property
    def n_model_in(self) -> int:
        """Input width seen by the reservoir (data dims, plus one for ``esnt``)."""
        return self.n_in + (self.variant == "esnt")

    @property
    def n_features(self) -> int:
        return 1 + self.n_units + (self.n_model_in if self.readout_input else 0)

    @property
    def n_params(self) -> int:
        """Trained parameter count (the readout only)."""
        if self.W_out is None:
            return 0
        return int(self.W_out.size)


def init_reservoir(variant="taesn", n_units=500, n_in=1, alpha=0.5, radius=0.9,
                   input_scaling=1.0, transform=None, readout_input=True,
                   rng=0) -> ReservoirModel:
    """Draw a reservoir: uniform input weights, dense recurrent weights at a given radius."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if n_units < 1 or n_in < 1:
        raise ValueError("n_units and n_in must be >= 1")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if input_scaling < 0:
        raise ValueError("input_scaling must be >= 0")
    if variant != "esn" and transform is None:
        raise ValueError(f"variant {variant!r} needs a time transform")
    rng = make_rng(rng)
    n_model_in = n_in + (variant == "esnt")
    W_in = input_scaling * rng.uniform(-1.0, 1.0, size=(n_units, n_model_in + 1))
    U = scale_to_radius(rng.uniform(-1.0, 1.0, size=(n_units, n_units)), radius)
    return ReservoirModel(variant=variant, alpha=float(alpha), W_in=W_in, U=U,
                          n_in=int(n_in), radius=float(radius), transform=transform,
                          readout_input=readout_input)


def _leak(model: ReservoirModel, dt_effective):
    if model.variant == "taesn":
        a = model.alpha * np.asarray(dt_effective, dtype=np.float64)
        if np.any(a > 1 + _STEP_TOL):
            raise ValueError(f"alpha * dt = {np.max(a):.6g} exceeds 1; "
                             "the Euler step is no longer a convex mix")
        if np.any(a < 0):
            raise ValueError("negative time step")
        return a
    return np.full(np.shape(dt_effective), model.alpha)


def _augment(model: ReservoirModel, x, dt_effective):
    if model.variant == "esnt":
        dt = np.asarray(dt_effective, dtype=np.float64)
        return np.concatenate([x, dt[..., None]], axis=-1)
    return x


def step(model: ReservoirModel, h_prev, x, dt_effective=1.0) -> np.ndarray:
    """One reservoir update from ``h_prev`` given input ``x`` and effective step."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[-1] != model.n_in:
        raise ValueError(f"expected {model.n_in} inputs, got {x.shape[-1]}")
    a = _leak(model, dt_effective)
    u = _augment(model, x, dt_effective)
    pre = model.W_in[:, 0] + model.W_in[:, 1:] @ u + model.U @ h_prev
    return (1.0 - a) * h_prev + a * np.tanh(pre)


def run_states(model: ReservoirModel, inputs, dt_effective, h0=None) -> np.ndarray:
    """Iterate :func:`step` over ``inputs``.

    ``inputs`` is ``(T, n_in)`` or batched ``(B, T, n_in)`` with matching
    ``dt_effective`` of shape ``(T,)`` or ``(B, T)``. Returns the states after
    each step, shape ``(T, n_units)`` or ``(B, T, n_units)``.
    """
    X = np.asarray(inputs, dtype=np.float64)
    dt = np.asarray(dt_effective, dtype=np.float64)
    batched = X.ndim == 3
    if not batched:
        X, dt = X[None], dt[None]
    B, T, n_in = X.shape
    if n_in != model.n_in:
        raise ValueError(f"expected {model.n_in} inputs, got {n_in}")
    if dt.shape != (B, T):
        raise ValueError(f"dt shape {dt.shape} does not match inputs {(B, T)}")
    a = _leak(model, dt)
    u = _augment(model, X, dt)
    drive = u @ model.W_in[:, 1:].T + model.W_in[:, 0]
    UT = model.U.T
    h = np.zeros((B, model.n_units)) if h0 is None else np.array(np.broadcast_to(h0, (B, model.n_units)), dtype=np.float64)
    out = np.empty((B, T, model.n_units))
    for n in range(T):
        an = a[:, n, None]
        h = (1.0 - an) * h + an * np.tanh(drive[:, n] + h @ UT)
        out[:, n] = h
    return out if batched else out[0]


def step_sizes(model: ReservoirModel, deltas) -> np.ndarray:
    """Effective steps for raw time deltas (ones for the plain ESN)."""
    d = np.asarray(deltas, dtype=np.float64)
    if model.variant == "esn":
        return np.ones_like(d)
    return model.transform.transform(d)


def _model_inputs(model, x, dt_eff):
    """``u_n`` as it enters the readout (data input, plus the step for esnt)."""
    return _augment(model, x, dt_eff)


def run_teacher_forced(model: ReservoirModel, series: SampledSeries, h0=None):
    """Forecasting-aligned trajectory over ``series``.

    Returns ``(states, inputs)`` with ``states[0] = h0`` (zeros by default)
    and ``states[n]`` the state at ``t_n`` after consuming ``x_{n-1}``;
    ``inputs[n]`` is the model input of that step (``inputs[0]`` is zero).
    """
    if series.n_dims != model.n_in:
        raise ValueError(f"series has {series.n_dims} dims, model expects {model.n_in}")
    N = len(series)
    h_start = np.zeros(model.n_units) if h0 is None else np.asarray(h0, dtype=np.float64)
    states = np.empty((N, model.n_units))
    states[0] = h_start
    inputs = np.zeros((N, model.n_model_in))
    if N > 1:
        dt_eff = step_sizes(model, series.deltas)
        states[1:] = run_states(model, series.values[:-1], dt_eff, h0=h_start)
        inputs[1:] = _model_inputs(model, series.values[:-1], dt_eff)
    return states, inputs


def readout_features(model: ReservoirModel, states, inputs) -> np.ndarray:
    """Stack ``[1; u_n; h_n]`` row-wise, shape ``(N, n_features)``."""
    ones = np.ones((len(states), 1))
    if model.readout_input:
        return np.hstack([ones, inputs, states])
    return np.hstack([ones, states])


def train_readout(model: ReservoirModel, series: SampledSeries, targets=None,
                  lam: float = 1e-6, washout: int = 100, h0=None) -> ReservoirModel:
    """Fit the linear readout by ridge regression on teacher-forced states.

    ``targets`` is aligned with the rows of ``series`` (defaults to the
    series values, i.e. one-step-ahead forecasting). Rows ``0..washout``
    are discarded. The training RMSE is stored in ``info``.
    """
    if targets is None:
        targets = series.values
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(Y) != len(series):
        raise ValueError("targets must have one row per observation")
    if not 0 <= washout < len(series) - 1:
        raise ValueError(f"washout {washout} leaves no training rows in a series of {len(series)}")
    states, inputs = run_teacher_forced(model, series, h0=h0)
    return readout_from_states(model, states, inputs, Y, lam=lam, washout=washout)


def readout_from_states(model: ReservoirModel, states, inputs, targets, lam: float = 1e-6,
                        washout: int = 100) -> ReservoirModel:
    """Ridge readout from an already computed teacher-forced trajectory.

    Because the reservoir is causal, the first ``k`` rows of a trajectory
    over a long series equal the trajectory over its first ``k`` points, so
    prefixes can be fitted without re-running the reservoir.
    """
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if not (len(states) == len(inputs) == len(Y)):
        raise ValueError("states, inputs and targets must have the same number of rows")
    if not 0 <= washout < len(Y) - 1:
        raise ValueError(f"washout {washout} leaves no training rows in {len(Y)} rows")
    F = readout_features(model, states, inputs)[washout + 1:]
    Yt = Y[washout + 1:]
    W = ridge_solve(F.T, Yt.T, lam)
    rmse = float(np.sqrt(np.mean((F @ W.T - Yt) ** 2)))
    info = dict(model.info, train_rmse=rmse, ridge=lam, washout=washout)
    return replace(model, W_out=W, info=info)


def _require_trained(model):
    if model.W_out is None:
        raise UntrainedModelError("reservoir readout has not been trained")


def run_generative(model: ReservoirModel, primer: SampledSeries, horizon_deltas,
                   h0=None) -> SampledSeries:
    """Teacher-force ``primer`` then run closed-loop over ``horizon_deltas``.

    Each prediction is fed back as the next input. The readout must map to
    the input space (``n_out == n_in``). A non-finite prediction raises
    ``FloatingPointError``.
    """
    _require_trained(model)
    if model.W_out.shape[0] != model.n_in:
        raise ValueError("closed-loop generation needs n_out == n_in")
    deltas = np.asarray(horizon_deltas, dtype=np.float64).ravel()
    states, _ = run_teacher_forced(model, primer, h0=h0)
    h = states[-1]
    x = primer.values[-1]
    t_last = primer.timestamps[-1]
    H = len(deltas)
    preds = np.empty((H, model.n_in))
    if H == 0:
        return SampledSeries(np.empty(0), preds)
    dt_eff = step_sizes(model, deltas)
    a = _leak(model, dt_eff)
    W_b, W_x = model.W_in[:, 0], model.W_in[:, 1:]
    for k in range(H):
        u = _augment(model, x, dt_eff[k])
        h = (1.0 - a[k]) * h + a[k] * np.tanh(W_b + W_x @ u + model.U @ h)
        f = np.concatenate([[1.0], u, h]) if model.readout_input else np.concatenate([[1.0], h])
        x = model.W_out @ f
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"closed-loop generation diverged at step {k}")
        preds[k] = x
    times = t_last + np.cumsum(deltas)
    return SampledSeries(times, preds)


# --- classification -------------------------------------------------------

def sequence_features(model: ReservoirModel, sequences, washout: int = 5,
                      pooling: str = "mean") -> np.ndarray:
    """Pooled ``[1; u_n; h_n]`` for each sequence, shape ``(n_seq, n_features)``.

    Sequences of equal length are run as one batch.
    """
    if pooling not in ("mean", "last"):
        raise ValueError("pooling must be 'mean' or 'last'")
    seqs = list(sequences)
    out = np.empty((len(seqs), model.n_features))
    by_len: dict[int, list[int]] = {}
    for i, s in enumerate(seqs):
        by_len.setdefault(len(s), []).append(i)
    for L, idx in by_len.items():
        X = np.stack([seqs[i].values for i in idx])
        raw = np.stack([np.concatenate([[np.nan], seqs[i].deltas]) for i in idx])
        dt = np.ones_like(raw)
        if L > 1:
            dt[:, 1:] = step_sizes(model, raw[:, 1:])
        H = run_states(model, X, dt)
        U = _model_inputs(model, X, dt)
        parts = [np.ones((len(idx), L, 1))]
        if model.readout_input:
            parts.append(U)
        parts.append(H)
        F = np.concatenate(parts, axis=-1)
        start = min(washout, L - 1)
        out[idx] = F[:, start:].mean(axis=1) if pooling == "mean" else F[:, -1]
    return out


def train_classifier_readout(model: ReservoirModel, sequences, labels, n_classes=None,
                             lam=1e-6, washout=5, pooling="mean") -> ReservoirModel:
    """Ridge readout onto one-hot labels from pooled sequence features."""
    y = np.asarray(labels, dtype=int)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    F = sequence_features(model, sequences, washout=washout, pooling=pooling)
    Y = np.eye(n_classes)[y]
    W = ridge_solve(F.T, Y.T, lam)
    info = dict(model.info, ridge=lam, washout=washout, pooling=pooling, n_classes=n_classes)
    return replace(model, W_out=W, info=info)


def classify_sequence(model: ReservoirModel, series: SampledSeries, washout=None,
                      pooling=None) -> np.ndarray:
    """Class scores for one sequence; ``argmax`` (lowest index on ties) is the prediction."""
    _require_trained(model)
    washout = model.info.get("washout", 5) if washout is None else washout
    pooling = model.info.get("pooling", "mean") if pooling is None else pooling
    f = sequence_features(model, [series], washout=washout, pooling=pooling)[0]
    return model.W_out @ f


# --- estimator front-ends -------------------------------------------------

def _make_transform(variant, kind, scale, clip):
    if variant == "esn":
        return None
    return TimeTransform(kind=kind, scale=scale, clip=clip)


class _ReservoirParams(BaseEstimator):
    def _build(self, n_in, deltas):
        tf = _make_transform(self.variant, self.time_transform, self.time_scale, self.time_clip)
        if tf is not None:
            d = np.asarray(deltas, dtype=np.float64)
            tf.fit(d if d.size else np.ones(1))
        return init_reservoir(self.variant, self.n_units, n_in, self.alpha,
                              self.spectral_radius, self.input_scaling, tf,
                              self.readout_input, self.random_state)


class ESNForecaster(RegressorMixin, _ReservoirParams):
    """One-step-ahead reservoir forecaster with closed-loop generation.

    Parameters
    ----------
    variant : {"esn", "taesn", "esnt"}
    n_units : int
    alpha : float
        Leaking rate (inverse time constant).
    spectral_radius : float
    input_scaling : float
    ridge : float
        Readout regularization.
    washout : int
    time_transform : {"linear", "exp"}
    time_scale : float
        Divisor inside the exponential transform.
    time_clip : float or None
        Clip for linearly normalized steps.
    readout_input : bool
        Whether the readout sees the input next to the state.
    random_state : int
    """

    def __init__(self, variant="taesn", n_units=500, alpha=0.5, spectral_radius=0.9,
                 input_scaling=1.0, ridge=1e-6, washout=100, time_transform="linear",
                 time_scale=1.0, time_clip=1.0, readout_input=True, random_state=0):
        self.variant = variant
        self.n_units = n_units
        self.alpha = alpha
        self.spectral_radius = spectral_radius
        self.input_scaling = input_scaling
        self.ridge = ridge
        self.washout = washout
        self.time_transform = time_transform
        self.time_scale = time_scale
        self.time_clip = time_clip
        self.readout_input = readout_input
        self.random_state = random_state

    def fit(self, X, y=None, times=None):
        series = as_series(X, times)
        model = self._build(series.n_dims, series.deltas)
        self.model_ = train_readout(model, series, y, self.ridge, self.washout)
        self.n_features_in_ = series.n_dims
        self.train_rmse_ = self.model_.info["train_rmse"]
        return self

    def predict(self, X, times=None):
        """Teacher-forced one-step-ahead predictions, one row per observation.

        Row 0 has no history and is the readout of the zero state.
        """
        check_is_fitted(self, "model_")
        series = as_series(X, times)
        check_n_dims([series], self.n_features_in_)
        states, inputs = run_teacher_forced(self.model_, series)
        return readout_features(self.model_, states, inputs) @ self.model_.W_out.T

    def forecast(self, primer, deltas, times=None) -> SampledSeries:
        """Closed-loop prediction at ``primer``'s last time plus ``cumsum(deltas)``."""
        check_is_fitted(self, "model_")
        return run_generative(self.model_, as_series(primer, times), deltas)


class ESNClassifier(ClassifierMixin, _ReservoirParams):
    """Sequence classifier on pooled reservoir states with a ridge readout."""

    def __init__(self, variant="taesn", n_units=500, alpha=0.5, spectral_radius=0.9,
                 input_scaling=1.0, ridge=1e-6, washout=5, pooling="mean",
                 time_transform="linear", time_scale=1.0, time_clip=1.0,
                 readout_input=True, random_state=0):
        self.variant = variant
        self.n_units = n_units
        self.alpha = alpha
        self.spectral_radius = spectral_radius
        self.input_scaling = input_scaling
        self.ridge = ridge
        self.washout = washout
        self.pooling = pooling
        self.time_transform = time_transform
        self.time_scale = time_scale
        self.time_clip = time_clip
        self.readout_input = readout_input
        self.random_state = random_state

    def fit(self, X, y, times=None):
        seqs = as_series_list(X, times)
        n_in = seqs[0].n_dims
        check_n_dims(seqs, n_in)
        self.classes_, y_idx = np.unique(np.asarray(y), return_inverse=True)
        deltas = np.concatenate([s.deltas for s in seqs])
        model = self._build(n_in, deltas)
        self.model_ = train_classifier_readout(model, seqs, y_idx, len(self.classes_),
                                               self.ridge, self.washout, self.pooling)
        self.n_features_in_ = n_in
        return self

    def decision_function(self, X, times=None):
        check_is_fitted(self, "model_")
        seqs = as_series_list(X, times)
        check_n_dims(seqs, self.n_features_in_)
        F = sequence_features(self.model_, seqs, self.washout, self.pooling)
        return F @ self.model_.W_out.T

    def predict(self, X, times=None):
        # np.argmax returns the first maximum, i.e. the lowest class index on ties
        return self.classes_[np.argmax(self.decision_function(X, times), axis=1)]
