"""Reference predictors the cascade model is compared against.

All of them consume the same partial observation (a cascade prefix up to T)
and produce future re-share counts:

* log-ratio regression (``lr_*``): lognormal growth factor per target time;
* its follower-featured variant (``lrn_*``): OLS on log R(T), log D(T), log d0;
* reinforced Poisson process (``rpp_*``): power-law aging times a
  count-reinforcement factor, fitted by projected gradient ascent;
* an unexpired-exposure final-count estimator (``seismic_*``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cascade import Cascade, KernelParams, kernel_integral
from .errors import RegressionFitError, SupercriticalError
from .estimate import windowed_mle

__all__ = [
    "LrModel",
    "lr_fit",
    "lr_predict",
    "lrn_fit",
    "lrn_predict",
    "RppModel",
    "rpp_log_likelihood",
    "rpp_gradient",
    "rpp_fit",
    "rpp_predict",
    "SeismicParams",
    "delta_exposure",
    "seismic_predict_final",
    "GAMMA_BOUNDS",
    "ALPHA_BOUNDS",
]

_FEATURE_NAMES = ("intercept", "log_R_T", "log_D_T", "log_d0")


@dataclass(frozen=True)
class LrModel:
    """Per-target-time log-growth coefficients.

    ``beta`` is None for the plain log-ratio variant and a (n_targets, 3)
    array of exponents on R(T), D(T), d0 for the follower-featured variant.
    ``sigma2`` is the maximum-likelihood residual variance (divisor n_train),
    used for the lognormal mean correction exp(sigma2 / 2).
    """

    T: float
    target_times: np.ndarray
    alpha: np.ndarray
    sigma2: np.ndarray
    beta: np.ndarray | None = None
    n_train: int = 0
    n_excluded: int = 0


def _target_index(m: LrModel, t: float) -> int:
    i = int(np.argmin(np.abs(m.target_times - t)))
    if not math.isclose(float(m.target_times[i]), t, rel_tol=1e-9, abs_tol=1e-6):
        raise ValueError(f"t={t} was not among the fitted target times")
    return i


def lr_fit(training, T: float, target_times) -> LrModel:
    """Fit the mean and variance of log(R(t)/R(T)) over a training corpus.

    Cascades with no re-share by T have an undefined log count and are
    excluded with a warning; with everything excluded there is nothing to
    fit and a RegressionFitError is raised.
    """
    target_times = np.asarray(target_times, dtype=float)
    if np.any(target_times <= T):
        raise ValueError("target times must lie beyond the observation end")
    rows = []
    n_excluded = 0
    for c in training:
        r_T = c.count_at(T)
        if r_T < 1:
            n_excluded += 1
            continue
        rows.append([math.log(c.count_at(t) / r_T) for t in target_times])
    if n_excluded:
        warnings.warn(f"excluded {n_excluded} training cascades with R(T) = 0")
    if len(rows) < 2:
        raise RegressionFitError(
            f"{len(rows)} usable training cascades; need at least 2"
        )
    y = np.asarray(rows)
    alpha = y.mean(axis=0)
    sigma2 = ((y - alpha) ** 2).mean(axis=0)
    return LrModel(T=float(T), target_times=target_times, alpha=alpha,
                   sigma2=sigma2, beta=None, n_train=len(rows),
                   n_excluded=n_excluded)


def lr_predict(m: LrModel, R_T: int, t: float) -> float:
    """Expected count at target time t given R(T), with lognormal correction."""
    if m.beta is not None:
        raise ValueError("model carries follower features; use lrn_predict")
    if R_T < 1:
        raise ValueError("R_T must be at least 1")
    i = _target_index(m, t)
    return float(R_T * math.exp(m.alpha[i] + m.sigma2[i] / 2.0))


def lrn_fit(training, T: float, target_times) -> LrModel:
    """OLS of log R(t) on [1, log R(T), log D(T), log d0] per target time.

    Rows with a zero feature (no re-shares, no reached followers, or a
    zero-follower origin) are excluded with a warning.
    """
    target_times = np.asarray(target_times, dtype=float)
    if np.any(target_times <= T):
        raise ValueError("target times must lie beyond the observation end")
    feats, targets = [], []
    n_excluded = 0
    for c in training:
        r_T = c.count_at(T)
        d_T = c.follower_sum_at(T)
        d0 = int(c.followers[0])
        if r_T < 1 or d_T <= 0 or d0 <= 0:
            n_excluded += 1
            continue
        feats.append([1.0, math.log(r_T), math.log(d_T), math.log(d0)])
        targets.append([math.log(c.count_at(t)) for t in target_times])
    if n_excluded:
        warnings.warn(f"excluded {n_excluded} training cascades with a zero feature")
    if len(feats) < 5:
        raise RegressionFitError(
            f"{len(feats)} usable training cascades; need at least 5"
        )
    x = np.asarray(feats)
    y = np.asarray(targets)
    sv = np.linalg.svd(x, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise RegressionFitError(
            "design matrix is rank deficient; collinear columns: "
            + ", ".join(_collinear_columns(x))
        )
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    sigma2 = (resid ** 2).mean(axis=0)
    return LrModel(T=float(T), target_times=target_times, alpha=coef[0],
                   sigma2=sigma2, beta=coef[1:].T.copy(), n_train=len(feats),
                   n_excluded=n_excluded)


def _collinear_columns(x: np.ndarray) -> list[str]:
    names = []
    std = x.std(axis=0)
    for j in range(1, x.shape[1]):
        if std[j] < 1e-12:
            names.append(f"{_FEATURE_NAMES[j]} (constant)")
    centred = x - x.mean(axis=0)
    for i in range(1, x.shape[1]):
        for j in range(i + 1, x.shape[1]):
            if std[i] < 1e-12 or std[j] < 1e-12:
                continue
            corr = centred[:, i] @ centred[:, j] / (
                len(x) * std[i] * std[j]
            )
            if abs(corr) > 1.0 - 1e-8:
                names.append(f"{_FEATURE_NAMES[i]}~{_FEATURE_NAMES[j]}")
    return names or ["undetermined"]


def lrn_predict(m: LrModel, R_T: int, D_T: int, d0: int, t: float) -> float:
    """Expected count at t: R(T)^b1 * D(T)^b2 * d0^b3 * exp(alpha + sigma2/2)."""
    if m.beta is None:
        raise ValueError("model has no follower features; use lr_predict")
    if R_T < 1 or D_T < 1 or d0 < 1:
        raise ValueError("R_T, D_T and d0 must be positive")
    i = _target_index(m, t)
    b1, b2, b3 = m.beta[i]
    log_pred = (m.alpha[i] + b1 * math.log(R_T) + b2 * math.log(D_T)
                + b3 * math.log(d0) + m.sigma2[i] / 2.0)
    return float(math.exp(log_pred))


# ---------------------------------------------------------------------------
# Reinforced Poisson process

GAMMA_BOUNDS = (1.5, 3.5)
ALPHA_BOUNDS = (0.001, 0.1)
RPP_T_FLOOR = 1.0


@dataclass(frozen=True)
class RppModel:
    """Fitted intensity c * t^-gamma * r_alpha(R(t-)) with fixed epsilon."""

    c: float
    gamma: float
    alpha: float
    epsilon: float = 0.1
    converged: bool = True
    iterations: int = 0

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not GAMMA_BOUNDS[0] <= self.gamma <= GAMMA_BOUNDS[1]:
            raise ValueError(f"gamma outside {GAMMA_BOUNDS}")
        if not ALPHA_BOUNDS[0] <= self.alpha <= ALPHA_BOUNDS[1]:
            raise ValueError(f"alpha outside {ALPHA_BOUNDS}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


def _rpp_times(cascade: Cascade, T: float, t_floor: float) -> np.ndarray:
    """Re-share times in (0, T], floored at t_floor for the aging term."""
    n = int(np.searchsorted(cascade.times, T, side="right"))
    ts = cascade.times[1:n]
    return np.maximum(ts, t_floor)


def _reinforcement(n: int, alpha: float, epsilon: float):
    """r_alpha(i) for i = 0..n and its derivative in alpha."""
    i = np.arange(n + 1, dtype=float)
    em1 = math.exp(-alpha)
    u = 1.0 - np.exp(-alpha * (i + 1.0))
    v = 1.0 - em1
    r = epsilon + u / v
    du = (i + 1.0) * np.exp(-alpha * (i + 1.0))
    dr = (du * v - u * em1) / v ** 2
    return r, dr


def _segments(ts: np.ndarray, T: float, t_floor: float):
    knots = np.concatenate(([t_floor], ts, [max(T, t_floor)]))
    return knots[:-1], knots[1:]


def _power_integrals(a, b, gamma: float):
    """J = int_a^b t^-gamma dt and dJ/dgamma on each segment."""
    m = 1.0 - gamma
    am, bm = a ** m, b ** m
    j = (bm - am) / m
    dj = (bm - am) / m ** 2 - (bm * np.log(b) - am * np.log(a)) / m
    return j, dj


def rpp_log_likelihood(params, cascade: Cascade, T: float,
                       epsilon: float = 0.1,
                       t_floor: float = RPP_T_FLOOR) -> float:
    """Point-process log-likelihood of the reinforced Poisson intensity.

    The origin event seeds the count but is excluded from the product; the
    compensator integral starts at ``t_floor`` where the power law becomes
    integrable.
    """
    scale, gamma, alpha = params
    ts = _rpp_times(cascade, T, t_floor)
    n = ts.size
    if n < 1:
        raise ValueError("need at least one re-share in (0, T]")
    r, _ = _reinforcement(n, alpha, epsilon)
    a, b = _segments(ts, T, t_floor)
    j, _ = _power_integrals(a, b, gamma)
    return float(n * math.log(scale) - gamma * np.log(ts).sum()
                 + np.log(r[:n]).sum() - scale * float(r @ j))


def rpp_gradient(params, cascade: Cascade, T: float, epsilon: float = 0.1,
                 t_floor: float = RPP_T_FLOOR) -> np.ndarray:
    """Analytic gradient of the log-likelihood in (c, gamma, alpha)."""
    scale, gamma, alpha = params
    ts = _rpp_times(cascade, T, t_floor)
    n = ts.size
    if n < 1:
        raise ValueError("need at least one re-share in (0, T]")
    r, dr = _reinforcement(n, alpha, epsilon)
    a, b = _segments(ts, T, t_floor)
    j, dj = _power_integrals(a, b, gamma)
    d_scale = n / scale - float(r @ j)
    d_gamma = -float(np.log(ts).sum()) - scale * float(r @ dj)
    d_alpha = float((dr[:n] / r[:n]).sum()) - scale * float(dr @ j)
    return np.array([d_scale, d_gamma, d_alpha])


def _rpp_ascent(cascade: Cascade, T: float, epsilon: float, lr: float,
                rel_tol: float, max_iter: int, t_floor: float):
    """Projected gradient ascent; yields the likelihood after each accepted step.

    The scale parameter moves in log space so one learning rate serves all
    three coordinates; a step that would lower the likelihood is halved
    until it improves (monotone ascent).
    """
    ts = _rpp_times(cascade, T, t_floor)
    n = ts.size
    if n < 1:
        raise ValueError("need at least one re-share in (0, T]")
    log_ts_sum = float(np.log(ts).sum())
    a, b = _segments(ts, T, t_floor)

    def pieces(gamma, alpha):
        r, dr = _reinforcement(n, alpha, epsilon)
        j, dj = _power_integrals(a, b, gamma)
        return r, dr, j, dj

    def ll_and_grad(u):
        scale = math.exp(u[0])
        gamma, alpha = u[1], u[2]
        r, dr, j, dj = pieces(gamma, alpha)
        rj = float(r @ j)
        ll = (n * u[0] - gamma * log_ts_sum + float(np.log(r[:n]).sum())
              - scale * rj)
        grad = np.array([
            n - scale * rj,                                  # d/d log c
            -log_ts_sum - scale * float(r @ dj),             # d/d gamma
            float((dr[:n] / r[:n]).sum()) - scale * float(dr @ j),
        ])
        return ll, grad

    def project(u):
        out = u.copy()
        out[1] = min(max(out[1], GAMMA_BOUNDS[0]), GAMMA_BOUNDS[1])
        out[2] = min(max(out[2], ALPHA_BOUNDS[0]), ALPHA_BOUNDS[1])
        return out

    # Profile the scale in closed form on a small grid to pick the start.
    best = None
    for gamma in (1.6, 2.0, 2.5, 3.0):
        for alpha in (0.002, 0.01, 0.05):
            r, _ = _reinforcement(n, alpha, epsilon)
            j, _ = _power_integrals(a, b, gamma)
            rj = float(r @ j)
            if rj <= 0:
                continue
            scale = n / rj
            u = np.array([math.log(scale), gamma, alpha])
            ll, _ = ll_and_grad(u)
            if best is None or ll > best[0]:
                best = (ll, u)
    if best is None:
        raise RegressionFitError("degenerate aging integral; cannot start ascent")
    ll, u = best
    _, grad = ll_and_grad(u)

    converged = False
    it = 0
    trace = [ll]
    while it < max_iter:
        it += 1
        step = lr * grad
        trial = project(u + step)
        ll_t, grad_t = ll_and_grad(trial)
        halved = 0
        while (not math.isfinite(ll_t) or ll_t < ll) and halved < 60:
            step = 0.5 * step
            trial = project(u + step)
            ll_t, grad_t = ll_and_grad(trial)
            halved += 1
        if not math.isfinite(ll_t) or ll_t < ll:
            converged = True  # no gradient step improves: stationary point
            break
        prev = np.array([math.exp(u[0]), u[1], u[2]])
        new = np.array([math.exp(trial[0]), trial[1], trial[2]])
        rel = float(np.max(np.abs(new - prev) / np.maximum(np.abs(prev), 1e-300)))
        u, ll, grad = trial, ll_t, grad_t
        trace.append(ll)
        if rel < rel_tol:
            converged = True
            break
    return u, ll, it, converged, trace


def rpp_fit(cascade: Cascade, T: float, epsilon: float = 0.1,
            lr: float = 1e-5, rel_tol: float = 1e-4, max_iter: int = 100_000,
            t_floor: float = RPP_T_FLOOR) -> RppModel:
    """Maximum-likelihood (c, gamma, alpha) by projected gradient ascent.

    gamma and alpha are clipped into their boxes after every step; the stop
    rule is a relative parameter change below ``rel_tol``.  Hitting the
    iteration cap flags the result as non-converged rather than failing.
    """
    u, _, it, converged, _ = _rpp_ascent(cascade, T, epsilon, lr, rel_tol,
                                         max_iter, t_floor)
    return RppModel(c=math.exp(u[0]), gamma=float(u[1]), alpha=float(u[2]),
                    epsilon=epsilon, converged=converged, iterations=it)


def rpp_predict(m: RppModel, R_T: int, T: float, t):
    """Closed-form expected count at time(s) t >= T.

    Solves dR/dt = c t^-gamma r_alpha(R) from the observed count; the
    softplus form keeps the expression stable when the exponent is large.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < T):
        raise ValueError("prediction times must be at or after T")
    if R_T < 0:
        raise ValueError("R_T must be non-negative")
    if not T > 0:
        raise ValueError("T must be positive")
    et = 1.0 + m.epsilon * (1.0 - math.exp(-m.alpha))
    one_m_g = 1.0 - m.gamma
    x = (et * m.c * m.alpha * (T ** one_m_g - t ** one_m_g)
         / (one_m_g * (1.0 - math.exp(-m.alpha)))
         - (R_T + 1.0) * m.alpha
         - math.log(et - math.exp(-m.alpha * (R_T + 1.0))))
    out = (np.logaddexp(0.0, x) - x - math.log(et) - m.alpha) / m.alpha
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Unexpired-exposure final-count estimator

@dataclass(frozen=True)
class SeismicParams:
    """Calibration constants and the trailing estimation window (seconds)."""

    alpha_T: float = 0.326
    beta_T: float = 20.0
    estimator_window: float = 3600.0


def delta_exposure(c: Cascade, T: float, k: KernelParams) -> float:
    """Unexpired follower exposure sum_i d_i * (1 - Phi(T - t_i)) up to T."""
    n = int(np.searchsorted(c.times, T, side="right"))
    times = c.times[:n]
    return float(np.dot(c.followers[:n],
                        1.0 - np.asarray(kernel_integral(T - times, k))))


def seismic_predict_final(c: Cascade, T: float,
                          sp: SeismicParams = SeismicParams(),
                          k: KernelParams = KernelParams()) -> float:
    """Final count R(T) + alpha_T * p_hat * dD(T) / (1 - beta_T * p_hat).

    ``p_hat`` is the windowed rate MLE over the trailing window; a branching
    factor beta_T * p_hat >= 1 means the geometric series diverges and the
    cascade is flagged supercritical instead of returning a number.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    t_st = max(T - sp.estimator_window, 0.0)
    p_hat = windowed_mle(c, t_st, T, k)
    if sp.beta_T * p_hat >= 1.0:
        raise SupercriticalError(
            f"beta_T * p_hat = {sp.beta_T * p_hat:.3f} >= 1 at T={T:.0f}s"
        )
    dd = delta_exposure(c, T, k)
    return float(c.count_at(T) + sp.alpha_T * p_hat * dd
                 / (1.0 - sp.beta_T * p_hat))
