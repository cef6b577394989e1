"""Synthetic chaotic series: Lorenz at irregular steps, Mackey-Glass resampled by spline."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .series import SampledSeries
from .timegrid import sample_irregular_steps

__all__ = [
    "LorenzConfig",
    "MackeyGlassConfig",
    "lorenz_rhs",
    "rk4_step",
    "generate_lorenz",
    "generate_mackey_glass",
    "cubic_spline_resample",
    "irregularize_mg",
]


@dataclass(frozen=True)
class LorenzConfig:
    n_steps: int = 10_000
    pi: float = 0.0
    seed: int = 0
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    initial_state: tuple = (1.0, 1.0, 1.0)
    base_dt: float = 0.01
    transient: int = 1000

    def __post_init__(self):
        if min(self.sigma, self.rho, self.beta, self.base_dt) <= 0:
            raise ValueError("Lorenz parameters and base_dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


@dataclass(frozen=True)
class MackeyGlassConfig:
    n_steps: int = 500_000
    beta: float = 0.2
    n_exp: float = 10.0
    gamma: float = 0.1
    tau: float = 17.0
    fine_dt: float = 0.01
    history: float = 1.2
    transient: int = 10_000

    def __post_init__(self):
        if self.tau <= 0 or self.fine_dt <= 0:
            raise ValueError("tau and fine_dt must be positive")
        d = self.tau / self.fine_dt
        if abs(d - round(d)) > 1e-9 * d:
            raise ValueError("tau must be an integer multiple of fine_dt")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


def lorenz_rhs(state, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    x, y, z = state
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def rk4_step(f, state, dt):
    """One classical Runge-Kutta step of ``dstate/dt = f(state)``."""
    k1 = f(state)
    k2 = f(state + 0.5 * dt * k1)
    k3 = f(state + 0.5 * dt * k2)
    k4 = f(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _lorenz_rk4(x, y, z, h, s, r, b):
    # scalar-unrolled for speed; equivalent to rk4_step(lorenz_rhs, ...)
    k1x, k1y, k1z = s * (y - x), x * (r - z) - y, x * y - b * z
    xa, ya, za = x + 0.5 * h * k1x, y + 0.5 * h * k1y, z + 0.5 * h * k1z
    k2x, k2y, k2z = s * (ya - xa), xa * (r - za) - ya, xa * ya - b * za
    xb, yb, zb = x + 0.5 * h * k2x, y + 0.5 * h * k2y, z + 0.5 * h * k2z
    k3x, k3y, k3z = s * (yb - xb), xb * (r - zb) - yb, xb * yb - b * zb
    xc, yc, zc = x + h * k3x, y + h * k3y, z + h * k3z
    k4x, k4y, k4z = s * (yc - xc), xc * (r - zc) - yc, xc * yc - b * zc
    return (x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x),
            y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y),
            z + h / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z))


def generate_lorenz(cfg: LorenzConfig = LorenzConfig()) -> SampledSeries:
    """Lorenz trajectory with one RK4 step per sampled time step.

    A transient of ``cfg.transient`` regular steps is discarded first; the
    first recorded sample sits at ``t = 0``.
    """
    s, r, b = cfg.sigma, cfg.rho, cfg.beta
    x, y, z = map(float, cfg.initial_state)
    for _ in range(cfg.transient):
        x, y, z = _lorenz_rk4(x, y, z, cfg.base_dt, s, r, b)
    n = cfg.n_steps
    dts = (sample_irregular_steps(cfg.pi, cfg.base_dt, n - 1, cfg.seed)
           if n > 1 else np.empty(0))
    out = np.empty((n, 3))
    out[0] = x, y, z
    for i, h in enumerate(dts.tolist(), start=1):
        x, y, z = _lorenz_rk4(x, y, z, h, s, r, b)
        out[i] = x, y, z
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("Lorenz integration blew up")
    t = np.concatenate([[0.0], np.cumsum(dts)])
    return SampledSeries(t, out, meta={"source": "lorenz", "pi": cfg.pi, "seed": cfg.seed})


def generate_mackey_glass(cfg: MackeyGlassConfig = MackeyGlassConfig()) -> SampledSeries:
    """Mackey-Glass on a regular fine grid by RK4.

    Delayed values come from the stored history; the half-step delays that
    fall between grid points are linearly interpolated. The history before
    ``t = 0`` is the constant ``cfg.history``.
    """
    h = cfg.fine_dt
    d = int(round(cfg.tau / h))
    beta, gam, p = cfg.beta, cfg.gamma, cfg.n_exp
    total = cfg.transient + cfg.n_steps
    # buf[k] holds x at step k - d; the first d+1 slots are the history
    buf = [cfg.history] * (d + 1)
    buf.extend([0.0] * (total - 1))
    x = cfg.history
    pw = math.pow

    def drive(xd):
        return beta * xd / (1.0 + pw(abs(xd), p))

    for k in range(total - 1):
        x0 = buf[k]          # x(t - tau)
        x1 = buf[k + 1]      # x(t - tau + h)
        xm = 0.5 * (x0 + x1)
        f0, fm, f1 = drive(x0), drive(xm), drive(x1)
        k1 = f0 - gam * x
        k2 = fm - gam * (x + 0.5 * h * k1)
        k3 = fm - gam * (x + 0.5 * h * k2)
        k4 = f1 - gam * (x + h * k3)
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        buf[k + 1 + d] = x
    vals = np.asarray(buf[d + cfg.transient: d + total])
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("Mackey-Glass integration blew up")
    t = h * np.arange(cfg.n_steps)
    return SampledSeries(t, vals, meta={"source": "mackey_glass", "fine_dt": h})


def cubic_spline_resample(fine: SampledSeries, query_times) -> SampledSeries:
    """Evaluate a natural cubic spline through ``fine`` at ``query_times``."""
    q = np.asarray(query_times, dtype=np.float64).ravel()
    t = fine.timestamps
    span_tol = 1e-9 * max(1.0, abs(t[-1]))
    if q.size and (q.min() < t[0] - span_tol or q.max() > t[-1] + span_tol):
        raise ValueError(f"query times [{q.min()}, {q.max()}] outside data span [{t[0]}, {t[-1]}]")
    spline = CubicSpline(t, fine.values, axis=0, bc_type="natural")
    return SampledSeries(q, spline(np.clip(q, t[0], t[-1])), meta=dict(fine.meta))


def irregularize_mg(fine: SampledSeries, pi: float, seed: int, n_points: int | None = None) -> SampledSeries:
    """Resample a fine series at steps drawn from ``(1 - pi, 1 + pi]``.

    The step draws depend only on ``seed``, so different ``pi`` values give
    affine rescalings of the same underlying numbers.
    """
    if not 0 <= pi < 1:
        raise ValueError(f"pi must lie in [0, 1), got {pi}")
    span = fine.timestamps[-1] - fine.timestamps[0]
    if n_points is None:
        n_points = int(span // (1.0 + pi)) + 1
    steps = sample_irregular_steps(pi, 1.0, max(n_points - 1, 1), seed)[: n_points - 1]
    q = fine.timestamps[0] + np.concatenate([[0.0], np.cumsum(steps)])
    if pi == 0:
        q = fine.timestamps[0] + np.arange(n_points, dtype=np.float64)
    out = cubic_spline_resample(fine, q)
    meta = dict(fine.meta, pi=pi, seed=seed)
    return SampledSeries(out.timestamps, out.values, meta=meta)
