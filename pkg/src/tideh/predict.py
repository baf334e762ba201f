"""Forecasting the future event rate of a partially observed cascade.

Conditioned on the events seen up to time T, the expected future rate obeys
the renewal-type integral equation

    lam(t) = f(t) + d_p * p(t) * integral_T^t lam(s) * phi(t - s) ds

where f(t) = p(t) * sum_{observed i} d_i * phi(t - t_i) is the drive from
observed events and d_p is the expected follower count of future events.
The solver marches forward on a uniform grid with trapezoidal weights; the
diagonal (implicit) term is solved algebraically since phi(0) is finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .cascade import Cascade, KernelParams, memory_kernel
from .errors import RebinError, StepTooCoarseError

__all__ = [
    "Forecast",
    "observed_drive",
    "mean_followers",
    "solve_volterra",
    "prediction_bin_edges",
    "predict_activity",
    "predict_final",
    "forecast_to_csv",
    "activity_to_csv",
]

DEFAULT_STEP = 360.0
DEFAULT_T_MAX = 604_800.0


@dataclass(frozen=True)
class Forecast:
    """Expected event rate on a uniform grid over [T, T_max]."""

    T: float
    T_max: float
    step: float
    grid: np.ndarray
    lambda_hat: np.ndarray
    d_p: float

    def total_expected(self) -> float:
        """Trapezoidal integral of the forecast rate over the whole grid."""
        return float(trapezoid(self.lambda_hat, dx=self.step))


def mean_followers(c: Cascade, T: float) -> float:
    """Mean follower count over events observed up to T (origin included)."""
    if T < 0:
        raise ValueError("T must be non-negative")
    n = int(np.searchsorted(c.times, T, side="right"))
    if n == 0:
        raise ValueError("no events observed by T")
    return float(c.followers[:n].mean())


def observed_drive(history, rate, k: KernelParams, t):
    """f(t): rate contribution of already-observed events at time(s) t.

    ``history`` is a Cascade (or (times, followers) pair); events later than
    t contribute nothing because the kernel vanishes on negative lags.
    """
    if isinstance(history, Cascade):
        times, followers = history.times, history.followers
    else:
        times, followers = history
        times = np.asarray(times, dtype=float)
        followers = np.asarray(followers, dtype=float)
    t = np.asarray(t, dtype=float)
    if times.size == 0:
        out = np.zeros_like(t)
        return out if out.ndim else float(out)
    scalar = t.ndim == 0
    tt = np.atleast_1d(t)
    load = np.empty(tt.size)
    chunk = max(1, int(2_000_000 // max(times.size, 1)))
    for lo in range(0, tt.size, chunk):
        hi = min(lo + chunk, tt.size)
        lags = tt[lo:hi, None] - times[None, :]
        load[lo:hi] = memory_kernel(lags, k) @ followers
    out = np.asarray(rate(tt), dtype=float) * load
    return float(out[0]) if scalar else out


def solve_volterra(c: Cascade, rate, k: KernelParams, T: float,
                   T_max: float = DEFAULT_T_MAX, step: float = DEFAULT_STEP,
                   d_p: float | None = None) -> Forecast:
    """Solve the forecast equation on [T, T_max] from the prefix of ``c`` up to T.

    ``d_p`` defaults to the mean follower count of the observed prefix; pass
    it explicitly when the expected follower count of future events is known
    (e.g. validation against a simulator with a known donor distribution).
    Negative transients from quadrature noise are clamped to zero.
    """
    if not T >= 0:
        raise ValueError("T must be non-negative")
    if not T_max > T:
        raise ValueError("T_max must exceed T")
    if not step > 0:
        raise ValueError("step must be positive")
    prefix = c.prefix(T)
    if d_p is None:
        d_p = mean_followers(prefix, T)
    if d_p < 0:
        raise ValueError("d_p must be non-negative")

    n = int(round((T_max - T) / step))
    if n < 1:
        raise ValueError("grid needs at least one step between T and T_max")
    grid = T + step * np.arange(n + 1)
    p_grid = np.asarray(rate(grid), dtype=float)
    phi_off = memory_kernel(step * np.arange(n + 1), k)
    phi0 = float(phi_off[0])

    f_grid = observed_drive(prefix, rate, k, grid)

    lam = np.empty(n + 1)
    lam[0] = max(float(f_grid[0]), 0.0)
    half = 0.5 * step
    for j in range(1, n + 1):
        denom = 1.0 - half * d_p * p_grid[j] * phi0
        if denom <= 0.0:
            raise StepTooCoarseError(
                f"implicit step unstable at t={grid[j]:.0f}s: "
                f"need step < {2.0 / (d_p * p_grid[j] * phi0):.3g}s"
            )
        conv = 0.5 * phi_off[j] * lam[0]
        if j > 1:
            conv += float(np.dot(phi_off[j - 1:0:-1], lam[1:j]))
        val = (f_grid[j] + d_p * p_grid[j] * step * conv) / denom
        lam[j] = val if val > 0.0 else 0.0
    if not np.all(np.isfinite(lam)):
        raise StepTooCoarseError("forecast rate overflowed; reduce the step "
                                 "or check the rate parameters")
    return Forecast(T=float(T), T_max=float(grid[-1]), step=float(step),
                    grid=grid, lambda_hat=lam, d_p=float(d_p))


def prediction_bin_edges(T: float, T_max: float, delta_pred: float) -> np.ndarray:
    """Edges T, T+delta, ... with the final bin truncated at T_max."""
    if not delta_pred > 0:
        raise ValueError("delta_pred must be positive")
    if not T_max > T:
        raise ValueError("T_max must exceed T")
    n_full = int(math.floor((T_max - T) / delta_pred + 1e-9))
    edges = [T + i * delta_pred for i in range(n_full + 1)]
    if edges[-1] < T_max - 1e-9 * delta_pred:
        edges.append(T_max)
    else:
        edges[-1] = T_max
    return np.asarray(edges)


def predict_activity(f: Forecast, delta_pred: float) -> np.ndarray:
    """Expected event counts per prediction bin (trapezoid over the grid).

    Bin edges must land on forecast grid points; the final bin may be a
    truncated remainder.  The bin integrals sum exactly to the integral over
    the whole grid.
    """
    if delta_pred < f.step:
        raise RebinError("delta_pred must be at least the forecast step")
    ratio = delta_pred / f.step
    m = int(round(ratio))
    if abs(ratio - m) > 1e-9:
        raise RebinError(
            f"delta_pred={delta_pred} is not a multiple of the grid step {f.step}"
        )
    n = f.grid.size - 1
    idx = list(range(0, n, m)) + [n]
    if len(idx) < 2:
        idx = [0, n]
    counts = []
    for a, b in zip(idx[:-1], idx[1:]):
        counts.append(float(trapezoid(f.lambda_hat[a:b + 1], dx=f.step)))
    return np.asarray(counts)


def predict_final(c: Cascade, f: Forecast) -> float:
    """Expected total re-share count at the forecast horizon.

    Observed count at T plus the integral of the forecast rate.
    """
    return float(c.count_at(f.T)) + f.total_expected()


def forecast_to_csv(f: Forecast, path) -> None:
    """Write the forecast rate as CSV with columns t_seconds, lambda_hat."""
    with open(path, "w") as fh:
        fh.write("t_seconds,lambda_hat\n")
        for t, lam in zip(f.grid, f.lambda_hat):
            fh.write(f"{t:.10g},{lam:.10g}\n")


def activity_to_csv(f: Forecast, delta_pred: float, path) -> None:
    """Write binned expected counts as CSV: bin_start_seconds, bin_width_seconds, A_k."""
    counts = predict_activity(f, delta_pred)
    edges = prediction_bin_edges(f.T, f.T_max, delta_pred)
    with open(path, "w") as fh:
        fh.write("bin_start_seconds,bin_width_seconds,A_k\n")
        for a, b, v in zip(edges[:-1], edges[1:], counts):
            fh.write(f"{a:.10g},{b - a:.10g},{v:.10g}\n")
