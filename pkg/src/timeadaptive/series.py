"""The timestamped sequence container passed between every module."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .timegrid import deltas_from_timestamps


@dataclass(frozen=True, eq=False)
class SampledSeries:
    """A multivariate sequence observed at strictly increasing times.

    ``values`` has shape ``(n_steps, n_dims)``; a 1-D input is promoted to a
    single column.
    """

    timestamps: np.ndarray
    values: np.ndarray
    label: int | None = None
    targets: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64).ravel()
        v = np.asarray(self.values, dtype=np.float64)
        if v.size == 0 and v.ndim < 2:
            v = v.reshape(0, 1)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {v.shape}")
        if len(t) != len(v):
            raise ValueError(f"{len(t)} timestamps for {len(v)} rows")
        if len(t) > 1:
            deltas_from_timestamps(t)
        if not np.all(np.isfinite(v)):
            raise ValueError("series values must be finite")
        if self.label is not None and int(self.label) < 0:
            raise ValueError("labels must be non-negative")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)
        if self.targets is not None:
            tg = np.asarray(self.targets, dtype=np.float64)
            if tg.ndim == 1:
                tg = tg[:, None]
            object.__setattr__(self, "targets", tg)

    def __len__(self):
        return len(self.timestamps)

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    @property
    def deltas(self) -> np.ndarray:
        if len(self) < 2:
            return np.empty(0)
        return np.diff(self.timestamps)

    def __getitem__(self, idx) -> "SampledSeries":
        if not isinstance(idx, slice):
            raise TypeError("SampledSeries only supports slicing")
        tg = None if self.targets is None else self.targets[idx]
        return replace(self, timestamps=self.timestamps[idx], values=self.values[idx], targets=tg)

    @classmethod
    def regular(cls, values, dt=1.0, t0=0.0, **kw) -> "SampledSeries":
        v = np.asarray(values, dtype=np.float64)
        return cls(t0 + dt * np.arange(len(v)), v, **kw)
