"""Time-step extraction, normalization and irregular step sampling."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .numerics import make_rng

__all__ = [
    "TimeTransform",
    "deltas_from_timestamps",
    "sample_irregular_steps",
]

KINDS = ("linear", "exp")


def deltas_from_timestamps(t) -> np.ndarray:
    """Consecutive differences of strictly increasing timestamps."""
    t = np.asarray(t, dtype=np.float64).ravel()
    if t.size < 2:
        raise ValueError("need at least two timestamps")
    if not np.all(np.isfinite(t)):
        raise ValueError("timestamps must be finite")
    d = np.diff(t)
    if np.any(d == 0):
        i = int(np.flatnonzero(d == 0)[0])
        raise ValueError(f"duplicate timestamp {float(t[i])!r} at index {i + 1}")
    if np.any(d < 0):
        i = int(np.flatnonzero(d < 0)[0])
        raise ValueError(f"timestamps not increasing at index {i + 1}")
    return d


def sample_irregular_steps(pi: float, base: float, n: int, rng) -> np.ndarray:
    """Draw ``n`` steps uniformly from ``(max(0, base - pi), base + pi]``.

    The draws are ``hi - (hi - lo) * u`` with ``u ~ U[0, 1)``, so two calls
    sharing a seed but differing in ``pi`` are affine images of the same
    underlying numbers.
    """
    if not base > 0:
        raise ValueError(f"base step must be positive, got {base}")
    if pi < 0:
        raise ValueError(f"irregularity factor must be >= 0, got {pi}")
    if n < 1:
        raise ValueError("n must be >= 1")
    lo = max(0.0, base - pi)
    hi = base + pi
    u = make_rng(rng).random(n)
    return hi - (hi - lo) * u


class TimeTransform(TransformerMixin, BaseEstimator):
    """Map raw time steps to effective model steps.

    ``kind="linear"`` divides by the largest step seen in :meth:`fit`, so the
    training steps land in ``[0, 1]``; larger test-time steps are clipped to
    ``clip`` (``None`` disables clipping). ``kind="exp"`` maps
    ``dt -> 1 - exp(-dt / scale)`` and needs no fitting statistics.

    Parameters
    ----------
    kind : {"linear", "exp"}
    scale : float, default=1.0
        Time unit divisor of the exponential map.
    clip : float or None, default=1.0
        Upper bound on linearly normalized steps.
    """

    def __init__(self, kind="linear", scale=1.0, clip=1.0):
        self.kind = kind
        self.scale = scale
        self.clip = clip

    def fit(self, X, y=None):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        d = np.asarray(X, dtype=np.float64).ravel()
        if d.size == 0:
            raise ValueError("cannot fit a time transform on zero steps")
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ValueError("time steps must be positive and finite")
        if self.kind == "linear":
            self.norm_constant_ = float(d.max())
        else:
            if not self.scale > 0:
                raise ValueError("scale must be positive")
            self.norm_constant_ = float(self.scale)
        return self

    def transform(self, X):
        check_is_fitted(self, "norm_constant_")
        d = np.asarray(X, dtype=np.float64)
        if np.any(d < 0):
            raise ValueError("time steps must be non-negative")
        if self.kind == "linear":
            out = d / self.norm_constant_
            if self.clip is not None:
                out = np.minimum(out, self.clip)
            return out
        return -np.expm1(-d / self.norm_constant_)

    def apply(self, delta: float) -> float:
        """Scalar version of :meth:`transform`."""
        return float(self.transform(np.float64(delta)))

    @classmethod
    def fixed(cls, kind="linear", norm_constant=1.0, clip=1.0):
        """Build an already-fitted transform with a given constant."""
        tf = cls(kind=kind, scale=norm_constant if kind == "exp" else 1.0, clip=clip)
        tf.norm_constant_ = float(norm_constant)
        return tf
