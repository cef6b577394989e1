"""Input coercion helpers for the estimator front-ends."""

from __future__ import annotations

import numpy as np

from .series import SampledSeries


def as_series(X, times=None) -> SampledSeries:
    """Coerce an array (with optional timestamps) to a :class:`SampledSeries`."""
    if isinstance(X, SampledSeries):
        if times is not None:
            raise ValueError("times given twice")
        return X
    v = np.asarray(X, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise ValueError(f"expected a 2-D array (n_steps, n_dims), got shape {v.shape}")
    t = np.arange(len(v), dtype=np.float64) if times is None else times
    return SampledSeries(t, v)


def as_series_list(X, times=None) -> list[SampledSeries]:
    """Coerce a collection of sequences to a list of :class:`SampledSeries`.

    Accepts a list of series, a list of 2-D arrays, or a 3-D array
    ``(n_sequences, n_steps, n_dims)``; a 2-D array is read as univariate
    sequences ``(n_sequences, n_steps)``.
    """
    if isinstance(X, SampledSeries):
        return [X]
    if isinstance(X, np.ndarray):
        if X.ndim == 2:
            X = X[:, :, None]
        if X.ndim != 3:
            raise ValueError(f"expected a 3-D array, got shape {X.shape}")
    seqs = list(X)
    if not seqs:
        raise ValueError("no sequences given")
    if times is None:
        times = [None] * len(seqs)
    if len(times) != len(seqs):
        raise ValueError("times and X have different lengths")
    return [as_series(s, t) for s, t in zip(seqs, times)]


def check_n_dims(series_list, n_dims: int):
    for s in series_list:
        if s.n_dims != n_dims:
            raise ValueError(f"expected {n_dims} input dims, got {s.n_dims}")
