"""Estimating the infectious rate of a cascade from a partial observation.

The pipeline is: maximum-likelihood rate estimates on consecutive windows
(ratio of event count to kernel exposure), then a least-squares fit of the
oscillating-decay rate shape to the windowed estimates.  The amplitude-only
refit and the cross-cascade shape trainer support the pre-trained variant
used when the observation is too short to identify the full shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import least_squares

from .cascade import (
    DAY_SECONDS,
    Cascade,
    InfectiousRateParams,
    KernelParams,
    kernel_integral,
)
from .errors import (
    DegenerateShapeError,
    NoBinsError,
    UndefinedRateError,
    UnderdeterminedFitError,
)
from .metrics import error_per_hour, observed_activity
from .predict import DEFAULT_STEP, DEFAULT_T_MAX, predict_activity, solve_volterra

__all__ = [
    "DEFAULT_DELTA_OBS",
    "TAU_M_MIN",
    "TAU_M_MAX",
    "RateProfile",
    "FitResult",
    "ShapeFit",
    "windowed_mle",
    "rate_profile",
    "fit_full",
    "fit_amplitude",
    "fit_constant",
    "shape_objective",
    "train_shape",
    "nelder_mead",
]

DEFAULT_DELTA_OBS = 14_400.0
TAU_M_MIN = 0.5 * DAY_SECONDS
TAU_M_MAX = 20.0 * DAY_SECONDS


def _window_stats(c: Cascade, t_st: float, t_en: float,
                  k: KernelParams) -> tuple[int, float]:
    """Event count in (t_st, t_en] and total kernel exposure in the window.

    Each event active before the window end is exposed for
    Phi(t_en - t_i) - Phi(t_st - t_i); the integral vanishes on negative
    arguments, so events inside the window count from their own time.
    """
    n_end = int(np.searchsorted(c.times, t_en, side="right"))
    n_start = int(np.searchsorted(c.times, t_st, side="right"))
    delta_r = n_end - n_start
    m = int(np.searchsorted(c.times, t_en, side="left"))
    times = c.times[:m]
    w = kernel_integral(t_en - times, k) - kernel_integral(t_st - times, k)
    exposure = float(np.dot(c.followers[:m], w)) if m else 0.0
    return delta_r, exposure


def windowed_mle(c: Cascade, t_st: float, t_en: float, k: KernelParams) -> float:
    """MLE of a constant per-follower rate on the window (t_st, t_en].

    Returns 0 when the window contains no events.  Events with zero total
    exposure are contradictory and raise UndefinedRateError.
    """
    if not 0 <= t_st < t_en:
        raise ValueError("need 0 <= t_st < t_en")
    delta_r, exposure = _window_stats(c, t_st, t_en, k)
    if delta_r == 0:
        return 0.0
    if exposure <= 0.0:
        raise UndefinedRateError(
            f"{delta_r} events in ({t_st:.0f}, {t_en:.0f}]s but zero exposure"
        )
    return delta_r / exposure


@dataclass(frozen=True)
class RateProfile:
    """Windowed rate estimates on consecutive bins tiling [0, T].

    Bins where the estimate carries no information about the rate (no
    events, or no exposure) are kept but flagged unusable; fits ignore them.
    """

    window: float
    T: float
    bin_index: np.ndarray
    p_hat: np.ndarray
    events: np.ndarray
    exposure: np.ndarray
    usable: np.ndarray

    @property
    def midpoints(self) -> np.ndarray:
        return (self.bin_index + 0.5) * self.window

    @property
    def n_usable(self) -> int:
        return int(self.usable.sum())


def rate_profile(c: Cascade, T: float, delta_obs: float = DEFAULT_DELTA_OBS,
                 k: KernelParams = KernelParams()) -> RateProfile:
    """Windowed-MLE rate estimates on floor(T / delta_obs) consecutive bins."""
    if not T > 0:
        raise ValueError("T must be positive")
    if not delta_obs > 0:
        raise ValueError("delta_obs must be positive")
    m = int(math.floor(T / delta_obs + 1e-9))
    if m < 1:
        raise NoBinsError(
            f"observation T={T:.0f}s is shorter than one bin of {delta_obs:.0f}s"
        )
    idx = np.arange(m)
    p_hat = np.zeros(m)
    events = np.zeros(m, dtype=np.int64)
    exposure = np.zeros(m)
    usable = np.zeros(m, dtype=bool)
    for i in range(m):
        delta_r, expo = _window_stats(c, i * delta_obs, (i + 1) * delta_obs, k)
        events[i] = delta_r
        exposure[i] = expo
        if delta_r > 0 and expo > 0.0:
            p_hat[i] = delta_r / expo
            usable[i] = True
        elif delta_r > 0:
            p_hat[i] = np.nan  # events without exposure: undefined estimate
        else:
            p_hat[i] = 0.0
    return RateProfile(window=float(delta_obs), T=float(T), bin_index=idx,
                       p_hat=p_hat, events=events, exposure=exposure,
                       usable=usable)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a rate-shape fit."""

    params: InfectiousRateParams
    residual: float
    converged: bool
    iterations: int


def _shape_factor(t, r0, phi0, tau_m, period):
    return (1.0 - r0 * np.sin(2.0 * math.pi * (t + phi0) / period)) * np.exp(
        -t / tau_m
    )


def _unpack(u, period):
    p0 = math.exp(min(max(u[0], -200.0), 60.0))
    r0 = math.tanh(u[1])
    phi0 = u[2] * period
    z = min(max(u[3], -500.0), 500.0)
    tau = TAU_M_MIN + (TAU_M_MAX - TAU_M_MIN) / (1.0 + math.exp(-z))
    return p0, r0, phi0, tau


def _pack(p0, r0, phi0, tau, period):
    frac = (tau - TAU_M_MIN) / (TAU_M_MAX - TAU_M_MIN)
    frac = min(max(frac, 1e-6), 1.0 - 1e-6)
    r0 = min(max(r0, -1.0 + 1e-9), 1.0 - 1e-9)
    return np.array([
        math.log(max(p0, 1e-300)),
        math.atanh(r0),
        phi0 / period,
        math.log(frac / (1.0 - frac)),
    ])


def _decay_init(t, p):
    """Log-linear decay fit giving initial amplitude and aging constant."""
    mask = p > 0
    if mask.sum() >= 2:
        slope, intercept = np.polyfit(t[mask], np.log(p[mask]), 1)
        tau = -1.0 / slope if slope < -1e-18 else TAU_M_MAX
        p0 = math.exp(min(intercept, 60.0))
    else:
        tau = 2.0 * DAY_SECONDS
        p0 = float(p[mask][0]) if mask.any() else 1e-4
    tau = min(max(tau, TAU_M_MIN * 1.02), TAU_M_MAX * 0.98)
    return max(p0, 1e-12), tau


def fit_full(profile: RateProfile, period: float = DAY_SECONDS,
             n_phase_starts: int = 8) -> FitResult:
    """Least-squares fit of (p0, r0, phi0, tau_m) to a rate profile.

    Minimises sum_k (p_hat_k - p(midpoint_k))^2 over usable bins with a
    Levenberg-Marquardt solver.  The open boxes |r0| < 1 and
    TAU_M_MIN < tau_m < TAU_M_MAX are enforced through a smooth sigmoid
    reparameterisation, which keeps the least-squares structure intact.
    The phase is multi-started on ``n_phase_starts`` equispaced offsets
    because the oscillation makes the residual landscape periodic; the
    reported fit is the best of all starts, with r0 canonicalised to be
    non-negative and phi0 wrapped into [0, period).
    """
    t = profile.midpoints[profile.usable]
    p = profile.p_hat[profile.usable]
    if t.size < 4:
        raise UnderdeterminedFitError(
            f"{t.size} usable bins cannot identify 4 parameters"
        )

    def resid(u):
        p0, r0, phi0, tau = _unpack(u, period)
        return p - p0 * _shape_factor(t, r0, phi0, tau, period)

    p0_init, tau_init = _decay_init(t, p)
    best = None
    for i in range(n_phase_starts):
        u0 = _pack(p0_init, 0.5, (i / n_phase_starts) * period, tau_init, period)
        res = least_squares(resid, u0, method="lm", xtol=1e-12, ftol=1e-12,
                            gtol=1e-12, max_nfev=4000)
        if best is None or res.cost < best.cost:
            best = res

    p0, r0, phi0, tau = _unpack(best.x, period)
    if r0 < 0:
        r0 = -r0
        phi0 += period / 2.0
    phi0 %= period
    # tanh can saturate to exactly 1 under wild trial steps; keep the rate valid
    r0 = min(r0, 1.0 - 1e-12)
    params = InfectiousRateParams(p0=p0, r0=r0, phi0=phi0, tau_m=tau,
                                  period=period)
    return FitResult(params=params, residual=2.0 * float(best.cost),
                     converged=bool(best.status > 0),
                     iterations=int(best.nfev))


def fit_amplitude(profile: RateProfile, shape, period: float = DAY_SECONDS) -> float:
    """Closed-form amplitude given a fixed shape (r0, phi0, tau_m).

    With g_k the shape factor at usable midpoints, the least-squares
    amplitude is sum(p_hat*g) / sum(g^2), clamped at zero.
    """
    r0, phi0, tau_m = shape
    if not abs(r0) < 1:
        raise ValueError("|r0| must be < 1")
    if not tau_m > 0:
        raise ValueError("tau_m must be positive")
    t = profile.midpoints[profile.usable]
    p = profile.p_hat[profile.usable]
    if t.size < 1:
        raise UnderdeterminedFitError("no usable bins to set the amplitude")
    g = _shape_factor(t, r0, phi0, tau_m, period)
    denom = float(np.dot(g, g))
    if not (np.isfinite(denom) and denom > 0.0):
        raise DegenerateShapeError("shape factor vanishes on every usable bin")
    return max(0.0, float(np.dot(p, g)) / denom)


def fit_constant(c: Cascade, T: float, k: KernelParams) -> float:
    """Single-window MLE of a constant rate over (0, T]."""
    if not T > 0:
        raise ValueError("T must be positive")
    delta_r, exposure = _window_stats(c, 0.0, T, k)
    if delta_r == 0:
        raise ValueError("constant-rate fit needs at least one event in (0, T]")
    if exposure <= 0.0:
        raise UndefinedRateError("events observed but zero exposure in (0, T]")
    return delta_r / exposure


def nelder_mead(f, x0, steps, max_iter: int = 200, rel_tol: float = 1e-3):
    """Downhill simplex with reflection/expansion/contraction/shrink = 1, 2, 0.5, 0.5.

    Stops when the simplex objective spread drops below ``rel_tol`` of the
    incumbent or after ``max_iter`` iterations.  Returns
    (x_best, f_best, iterations, evaluations).
    """
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    x0 = np.asarray(x0, dtype=float)
    steps = np.asarray(steps, dtype=float)
    n = x0.size
    simplex = [x0.copy()]
    for i in range(n):
        x = x0.copy()
        x[i] += steps[i]
        simplex.append(x)
    fvals = np.array([f(x) for x in simplex])
    n_eval = n + 1
    it = 0
    for it in range(1, max_iter + 1):
        order = np.argsort(fvals, kind="stable")
        simplex = [simplex[i] for i in order]
        fvals = fvals[order]
        spread = fvals[-1] - fvals[0]
        if np.isfinite(spread) and spread <= rel_tol * max(abs(fvals[0]), 1e-12):
            break
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + alpha * (centroid - simplex[-1])
        fr = f(xr)
        n_eval += 1
        if fvals[0] <= fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[0]:
            xe = centroid + gamma * (centroid - simplex[-1])
            fe = f(xe)
            n_eval += 1
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + rho * (xr - centroid)
            else:
                xc = centroid + rho * (simplex[-1] - centroid)
            fc = f(xc)
            n_eval += 1
            if fc < min(fr, fvals[-1]):
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    fvals[i] = f(simplex[i])
                n_eval += n
    order = np.argsort(fvals, kind="stable")
    return simplex[order[0]].copy(), float(fvals[order[0]]), it, n_eval


class ShapeFit(NamedTuple):
    r0: float
    phi0: float
    tau_m: float
    objective: float


def shape_objective(shape, training: Sequence[Cascade], T: float,
                    delta_pred: float, T_max: float = DEFAULT_T_MAX,
                    k: KernelParams = KernelParams(),
                    delta_obs: float = DEFAULT_DELTA_OBS,
                    step: float = DEFAULT_STEP,
                    period: float = DAY_SECONDS) -> float:
    """Mean per-hour activity error of forecasts made with a fixed shape.

    Each training cascade gets its own amplitude from the closed-form refit
    on its observation prefix; the error compares the forecast activity to
    the cascade's actual future activity up to T_max.
    """
    r0, phi0, tau_m = shape
    errs = []
    for c in training:
        prefix = c.prefix(T)
        prof = rate_profile(prefix, T, min(delta_obs, T), k)
        p0 = fit_amplitude(prof, (r0, phi0, tau_m), period)
        rate = InfectiousRateParams(p0=p0, r0=r0, phi0=phi0, tau_m=tau_m,
                                    period=period)
        fc = solve_volterra(prefix, rate, k, T, T_max, step)
        pred = predict_activity(fc, delta_pred)
        actual = observed_activity(c, T, T_max, delta_pred)
        errs.append(error_per_hour(pred, actual, T, T_max))
    if not errs:
        raise ValueError("training set is empty")
    return float(np.mean(errs))


def _shape_from_z(z, period):
    r0 = math.tanh(z[0])
    phi0 = (z[1] % 1.0) * period
    tau = TAU_M_MIN + (TAU_M_MAX - TAU_M_MIN) / (1.0 + math.exp(-z[2]))
    return r0, phi0, tau


def train_shape(training: Sequence[Cascade], T: float, delta_pred: float,
                T_max: float = DEFAULT_T_MAX,
                k: KernelParams = KernelParams(),
                delta_obs: float = DEFAULT_DELTA_OBS,
                step: float = DEFAULT_STEP, period: float = DAY_SECONDS,
                starts=None, max_iter: int = 200,
                rel_tol: float = 1e-3) -> ShapeFit:
    """Shared rate shape minimising the mean forecast error over a corpus.

    Downhill-simplex search in a transformed space that keeps |r0| < 1 and
    tau_m inside its box; multi-started over the oscillation phase since the
    objective is periodic in phi0.  Start points whose objective cannot be
    evaluated are skipped; if every evaluation fails the data cannot train
    a shape and a ValueError is raised.
    """
    if len(training) == 0:
        raise ValueError("training set is empty")

    def objective_z(z):
        try:
            return shape_objective(_shape_from_z(z, period), training, T,
                                   delta_pred, T_max, k, delta_obs, step,
                                   period)
        except ValueError:
            return math.inf

    if starts is None:
        starts = [(0.5, frac * period, 2.0 * DAY_SECONDS)
                  for frac in (0.0, 0.25, 0.5, 0.75)]
    best_z, best_f = None, math.inf
    for r0, phi0, tau in starts:
        z0 = np.array([
            math.atanh(min(max(r0, -1 + 1e-9), 1 - 1e-9)),
            phi0 / period,
            math.log(((tau - TAU_M_MIN) / (TAU_M_MAX - TAU_M_MIN)) /
                     (1 - (tau - TAU_M_MIN) / (TAU_M_MAX - TAU_M_MIN))),
        ])
        z, fz, _, _ = nelder_mead(objective_z, z0, steps=(0.4, 0.15, 0.5),
                                  max_iter=max_iter, rel_tol=rel_tol)
        if fz < best_f:
            best_z, best_f = z, fz
    if best_z is None or not math.isfinite(best_f):
        raise ValueError("shape objective failed on every start point")
    r0, phi0, tau = _shape_from_z(best_z, period)
    if r0 < 0:
        r0 = -r0
        phi0 = (phi0 + period / 2.0) % period
    return ShapeFit(r0=r0, phi0=phi0, tau_m=tau, objective=best_f)
