"""Command-line front end: simulate, fit, predict, evaluate, compare.

Times on the command line are hours (days for the slow rate constants);
everything is converted to seconds at the boundary.  Failures print a
machine-readable JSON object to stderr and exit non-zero.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .cascade import (
    DAY_SECONDS,
    HOUR_SECONDS,
    InfectiousRateParams,
    KernelParams,
)
from .estimate import fit_amplitude, fit_constant, fit_full, rate_profile
from .harness import (
    EvalResult,
    ExperimentConfig,
    comparison_to_csv,
    compare_methods,
    load_cascade,
    load_corpus,
    run_experiment,
    save_corpus,
    METHODS,
)
from .predict import activity_to_csv, forecast_to_csv, predict_final, solve_volterra
from .simulate import FollowerSampler, simulate_batch

_KERNEL = KernelParams()


def _fail(exc: BaseException, code: int = 2):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, OSError) as exc:
            _fail(exc)
    return wrapper


def _parse_shape(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise ValueError("shape must be 'r0,phi0_days,tau_m_days'")
    return parts[0], parts[1] * DAY_SECONDS, parts[2] * DAY_SECONDS


@click.group()
def main():
    """Model, simulate and forecast re-share cascades."""


@main.command()
@click.option("--n", type=int, default=1, show_default=True, help="Cascades to sample.")
@click.option("--p0", type=float, required=True, help="Rate amplitude (per follower).")
@click.option("--r0", type=float, default=0.0, show_default=True)
@click.option("--phi0-days", type=float, default=0.0, show_default=True)
@click.option("--tau-m-days", type=float, default=2.0, show_default=True)
@click.option("--origin-followers", type=int, required=True)
@click.option("--followers", type=int, default=None,
              help="Constant follower count for sampled events.")
@click.option("--donor", type=click.Path(exists=True), default=None,
              help="Cascade file whose follower counts are drawn with replacement.")
@click.option("--horizon-hours", type=float, default=168.0, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True, help="Corpus directory.")
@_guarded
def simulate(n, p0, r0, phi0_days, tau_m_days, origin_followers, followers,
             donor, horizon_hours, seed, out):
    """Sample cascades from the oscillating-decay rate model."""
    rate = InfectiousRateParams(p0=p0, r0=r0, phi0=phi0_days * DAY_SECONDS,
                                tau_m=tau_m_days * DAY_SECONDS)
    if donor is not None:
        fs = FollowerSampler.empirical(load_cascade(donor).followers)
    elif followers is not None:
        fs = FollowerSampler.constant(followers)
    else:
        raise ValueError("give either --followers or --donor")
    cascades = simulate_batch(n, rate, _KERNEL, origin_followers, fs,
                              horizon_hours * HOUR_SECONDS, seed)
    save_corpus(cascades, out)
    click.echo(json.dumps({
        "cascades": len(cascades),
        "events": [len(c) for c in cascades],
        "out": str(out),
    }, sort_keys=True))


@main.command()
@click.option("--cascade", "cascade_path", type=click.Path(exists=True), required=True)
@click.option("--t-hours", type=float, required=True, help="Observation length.")
@click.option("--delta-obs-hours", type=float, default=4.0, show_default=True)
@click.option("--mode", type=click.Choice(["full", "constant", "amplitude"]),
              default="full", show_default=True)
@click.option("--shape", type=str, default=None,
              help="r0,phi0_days,tau_m_days (amplitude mode).")
@_guarded
def fit(cascade_path, t_hours, delta_obs_hours, mode, shape):
    """Fit the infectious rate from a cascade prefix; prints JSON."""
    c = load_cascade(cascade_path)
    T = t_hours * HOUR_SECONDS
    delta_obs = min(delta_obs_hours * HOUR_SECONDS, T)
    if mode == "constant":
        p0 = fit_constant(c.prefix(T), T, _KERNEL)
        click.echo(json.dumps({"mode": mode, "p0": p0}, sort_keys=True))
        return
    prof = rate_profile(c.prefix(T), T, delta_obs, _KERNEL)
    if mode == "amplitude":
        if shape is None:
            raise ValueError("amplitude mode needs --shape")
        r0, phi0, tau_m = _parse_shape(shape)
        p0 = fit_amplitude(prof, (r0, phi0, tau_m))
        out = {"mode": mode, "p0": p0, "r0": r0,
               "phi0_days": phi0 / DAY_SECONDS,
               "tau_m_days": tau_m / DAY_SECONDS}
    else:
        res = fit_full(prof)
        q = res.params
        out = {"mode": mode, "p0": q.p0, "r0": q.r0,
               "phi0_days": q.phi0 / DAY_SECONDS,
               "tau_m_days": q.tau_m / DAY_SECONDS,
               "residual": res.residual, "converged": res.converged,
               "iterations": res.iterations}
    click.echo(json.dumps(out, sort_keys=True))


@main.command()
@click.option("--cascade", "cascade_path", type=click.Path(exists=True), required=True)
@click.option("--t-hours", type=float, required=True)
@click.option("--t-max-hours", type=float, default=168.0, show_default=True)
@click.option("--delta-pred-hours", type=float, default=4.0, show_default=True)
@click.option("--step-hours", type=float, default=0.1, show_default=True)
@click.option("--delta-obs-hours", type=float, default=4.0, show_default=True)
@click.option("--mode", type=click.Choice(["full", "constant"]), default="full",
              show_default=True, help="How to fit the rate before forecasting.")
@click.option("--params", type=str, default=None,
              help="Skip fitting: p0,r0,phi0_days,tau_m_days.")
@click.option("--out-prefix", type=str, required=True)
@_guarded
def predict(cascade_path, t_hours, t_max_hours, delta_pred_hours, step_hours,
            delta_obs_hours, mode, params, out_prefix):
    """Forecast the future rate of a partially observed cascade."""
    c = load_cascade(cascade_path)
    T = t_hours * HOUR_SECONDS
    if params is not None:
        vals = [float(v) for v in params.split(",")]
        if len(vals) != 4:
            raise ValueError("--params must be p0,r0,phi0_days,tau_m_days")
        rate = InfectiousRateParams(p0=vals[0], r0=vals[1],
                                    phi0=vals[2] * DAY_SECONDS,
                                    tau_m=vals[3] * DAY_SECONDS)
    elif mode == "constant":
        rate = InfectiousRateParams.constant(fit_constant(c.prefix(T), T, _KERNEL))
    else:
        delta_obs = min(delta_obs_hours * HOUR_SECONDS, T)
        rate = fit_full(rate_profile(c.prefix(T), T, delta_obs, _KERNEL)).params
    fc = solve_volterra(c.prefix(T), rate, _KERNEL, T,
                        t_max_hours * HOUR_SECONDS, step_hours * HOUR_SECONDS)
    forecast_path = f"{out_prefix}forecast.csv"
    activity_path = f"{out_prefix}activity.csv"
    forecast_to_csv(fc, forecast_path)
    activity_to_csv(fc, delta_pred_hours * HOUR_SECONDS, activity_path)
    click.echo(json.dumps({
        "observed": c.count_at(T),
        "final_pred": predict_final(c, fc),
        "forecast_csv": forecast_path,
        "activity_csv": activity_path,
    }, sort_keys=True))


@main.command()
@click.option("--method", type=click.Choice(list(METHODS)), required=True)
@click.option("--corpus", type=click.Path(exists=True), default=None,
              help="Corpus directory (defaults to TIDEH_DATA_DIR).")
@click.option("--t-hours", type=float, required=True)
@click.option("--delta-pred-hours", type=float, required=True)
@click.option("--delta-obs-hours", type=float, default=4.0, show_default=True)
@click.option("--t-max-hours", type=float, default=168.0, show_default=True)
@click.option("--step-hours", type=float, default=0.1, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--threshold", type=int, default=2000, show_default=True,
              help="Minimum total re-share count for inclusion.")
@click.option("--seed", type=int, default=None,
              help="Fold shuffle seed (required for trained methods).")
@click.option("--out", type=click.Path(), required=True)
@_guarded
def evaluate(method, corpus, t_hours, delta_pred_hours, delta_obs_hours,
             t_max_hours, step_hours, folds, threshold, seed, out):
    """Run one method over a corpus and write records.csv + summary.json."""
    cfg = ExperimentConfig(
        method=method,
        T=t_hours * HOUR_SECONDS,
        delta_pred=delta_pred_hours * HOUR_SECONDS,
        delta_obs=delta_obs_hours * HOUR_SECONDS,
        T_max=t_max_hours * HOUR_SECONDS,
        folds=folds,
        popularity_threshold=threshold,
        seed=seed,
        step=step_hours * HOUR_SECONDS,
        out_dir=out,
    )
    result = run_experiment(cfg, load_corpus(corpus))
    click.echo(json.dumps({"aggregates": result.aggregates,
                           "exclusions": result.exclusions,
                           "out": str(out)}, sort_keys=True))


@main.command()
@click.argument("result_dirs", nargs=-1, required=True,
                type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="Write table CSV.")
@_guarded
def compare(result_dirs, out):
    """Tabulate saved evaluation results against the model's variants."""
    rows = compare_methods([EvalResult.load(d) for d in result_dirs])
    if out is not None:
        comparison_to_csv(rows, out)
    click.echo(json.dumps(rows, sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
