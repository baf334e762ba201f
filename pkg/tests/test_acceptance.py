"""Acceptance suite: one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria complete.  Criterion 8 is tied to a specific real-world corpus and
skips unless TIDEH_DATA_DIR points at it.
"""

import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from tideh import (
    DAY_SECONDS,
    Cascade,
    ExperimentConfig,
    InfectiousRateParams,
    RppModel,
    continue_cascade,
    fit_amplitude,
    fit_full,
    kernel_integral,
    load_corpus,
    lr_fit,
    lrn_fit,
    memory_kernel,
    observed_activity,
    predict_activity,
    rate_profile,
    rpp_gradient,
    rpp_log_likelihood,
    rpp_predict,
    run_experiment,
    seismic_predict_final,
    solve_volterra,
)
from tideh.cascade import KernelParams

from conftest import TRUTH


@contextmanager
def criterion(num, label):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {num} {label}: FAIL")
        raise
    print(f"\nACCEPTANCE {num} {label}: PASS")


def circular_mean_sd(values, period=DAY_SECONDS):
    """Mean and dispersion of a periodic quantity via the mean phasor."""
    z = np.exp(2j * np.pi * np.asarray(values) / period)
    m = z.mean()
    mean = (np.angle(m) % (2.0 * np.pi)) * period / (2.0 * np.pi)
    r = min(max(abs(m), 1e-300), 1.0)
    sd = period / (2.0 * np.pi) * math.sqrt(-2.0 * math.log(r))
    return mean, sd


def fit_corpus(corpus, T, delta_obs, k):
    return [fit_full(rate_profile(c.prefix(T), T, delta_obs, k)).params
            for c in corpus]


# ---------------------------------------------------------------------------


def test_c1_kernel_normalization(kernel):
    with criterion(1, "kernel normalization"):
        assert abs(kernel_integral(np.inf, kernel) - 0.99924) <= 1e-5
        rng = np.random.default_rng(11)
        pts = np.concatenate([rng.uniform(0.0, kernel.s0, 30),
                              10 ** rng.uniform(2.5, 6.0, 70)])
        for s in pts:
            numeric, _ = quad(lambda u: memory_kernel(u, kernel), 0.0, s,
                              points=[kernel.s0], limit=200)
            assert kernel_integral(float(s), kernel) == pytest.approx(
                numeric, rel=1e-6)


def test_c2_parameter_recovery(kernel, circadian_corpus_100):
    with criterion(2, "infectious-rate parameter recovery"):
        t0 = time.monotonic()
        fits = fit_corpus(circadian_corpus_100, 2.0 * DAY_SECONDS, 14_400.0,
                          kernel)
        assert len(fits) == 100
        mean_p0 = np.mean([f.p0 for f in fits])
        mean_r0 = np.mean([f.r0 for f in fits])
        mean_phi, _ = circular_mean_sd([f.phi0 for f in fits])
        mean_tau = np.mean([f.tau_m for f in fits])
        assert abs(mean_p0 - TRUTH.p0) <= 0.00027
        assert abs(mean_r0 - TRUTH.r0) <= 0.207
        assert abs(mean_phi - TRUTH.phi0) <= 0.090 * DAY_SECONDS
        assert abs(mean_tau - TRUTH.tau_m) <= 1.98 * DAY_SECONDS
        assert time.monotonic() - t0 < 300.0


def test_c3_observation_length_degradation(kernel, circadian_corpus_100):
    # reference dispersions at the 2-day observation scale: 0.030 d for the
    # phase, 0.66 d for the decay time (the 3-sigma bands in criterion 2
    # are three times these).  The 12 h arm needs finer observation bins
    # than the 2-day default (4 h bins leave only 3 usable points).
    with criterion(3, "short-observation degradation"):
        short = fit_corpus(circadian_corpus_100, 43_200.0, 7200.0, kernel)
        long_ = fit_corpus(circadian_corpus_100, 2.0 * DAY_SECONDS, 14_400.0,
                           kernel)
        _, phi_sd_short = circular_mean_sd([f.phi0 for f in short])
        tau_sd_short = float(np.std([f.tau_m for f in short]))
        tau_sd_long = float(np.std([f.tau_m for f in long_]))
        assert phi_sd_short >= 2.0 * 0.030 * DAY_SECONDS
        assert tau_sd_short >= 2.0 * 0.66 * DAY_SECONDS
        assert tau_sd_short >= 2.0 * tau_sd_long

        rels = []
        for c in circadian_corpus_100:
            prof = rate_profile(c.prefix(3600.0), 3600.0, 900.0, kernel)
            p0 = fit_amplitude(prof, (TRUTH.r0, TRUTH.phi0, TRUTH.tau_m))
            rels.append(abs(p0 - TRUTH.p0) / TRUTH.p0)
        assert np.mean(rels) < 0.10


def test_c4_forecast_vs_monte_carlo(kernel, donors, donor_sampler,
                                    circadian_corpus_100):
    T, T_max, delta = 7200.0, 43_200.0, 1800.0
    with criterion(4, "integral-equation forecast vs Monte Carlo"):
        t0 = time.monotonic()
        prefix = circadian_corpus_100[0].prefix(T)
        assert len(prefix) > 100
        fc = solve_volterra(prefix, TRUTH, kernel, T, T_max, step=60.0,
                            d_p=float(donors.mean()))
        pred = predict_activity(fc, delta)

        n_mc = 10_000
        acc = np.zeros((n_mc, len(pred)))
        for i in range(n_mc):
            cont = continue_cascade(prefix, TRUTH, kernel, donor_sampler,
                                    T, T_max, seed=50_000 + i)
            acc[i] = observed_activity(cont, T, T_max, delta)
        mc_mean = acc.mean(axis=0)
        mc_se = acc.std(axis=0, ddof=1) / math.sqrt(n_mc)
        z = np.abs(pred - mc_mean) / mc_se
        assert np.mean(z <= 3.0) >= 0.95
        assert time.monotonic() - t0 < 600.0


def test_c5_rpp_closed_form_and_gradient():
    with criterion(5, "reinforced-Poisson closed form and gradient"):
        rng = np.random.default_rng(424242)
        base = Cascade("probe", [0.0, 15.0, 40.0, 90.0, 300.0, 900.0],
                       [700, 8, 8, 8, 8, 8])
        for _ in range(50):
            c = float(rng.uniform(0.05, 3.0))
            gamma = float(rng.uniform(1.5, 3.5))
            alpha = float(rng.uniform(0.001, 0.1))
            eps = 0.1
            r_T = int(rng.integers(1, 80))
            T = float(rng.uniform(600.0, 7200.0))
            t = T + float(rng.uniform(0.0, 1e5))
            m = RppModel(c=c, gamma=gamma, alpha=alpha, epsilon=eps)

            def reinforcement(y):
                return eps + (1.0 - math.exp(-alpha * (y + 1))) / (
                    1.0 - math.exp(-alpha))

            sol = solve_ivp(lambda s, y: c * s ** -gamma * reinforcement(y[0]),
                            (T, t), [float(r_T)], rtol=1e-11, atol=1e-11)
            ref = float(sol.y[0, -1])
            assert float(rpp_predict(m, r_T, T, t)) == pytest.approx(
                ref, rel=1e-3)

            x = np.array([c, gamma, alpha])
            grad = rpp_gradient(x, base, 1200.0)
            for i in range(3):
                h = 1e-5 * max(abs(x[i]), 1e-2)
                up, dn = x.copy(), x.copy()
                up[i] += h
                dn[i] -= h
                fd = (rpp_log_likelihood(up, base, 1200.0)
                      - rpp_log_likelihood(dn, base, 1200.0)) / (2 * h)
                assert abs(grad[i] - fd) <= 1e-4 * max(abs(fd), 1.0)


def _loglinear_corpus(rng, n, coef, sigma):
    """Cascades whose count growth is exactly log-linear in the features."""
    a, b1, b2, b3 = coef
    out = []
    for i in range(n):
        r_T = int(rng.integers(200, 800))
        d0 = int(rng.integers(100, 100_000))
        mean_f = float(rng.lognormal(5.0, 1.2))
        d_T = max(r_T, int(r_T * mean_f))
        y = (a + b1 * math.log(r_T) + b2 * math.log(d_T) + b3 * math.log(d0)
             + rng.normal(0.0, sigma))
        r_t = max(r_T, int(round(math.exp(y))))
        per = d_T // r_T
        ts = [0.0] + list(np.linspace(1.0, 100.0, r_T))
        ds = [d0] + [per] * (r_T - 1) + [d_T - per * (r_T - 1)]
        ts += list(np.linspace(101.0, 400.0, r_t - r_T))
        ds += [1] * (r_t - r_T)
        out.append(Cascade(f"p{i}", ts, ds))
    return out


def test_c6_regression_and_final_count_sanity(kernel):
    with criterion(6, "regression recovery and final-count sanity"):
        # growth-ratio regression on pure lognormal-growth data
        corpus = _loglinear_corpus(np.random.default_rng(0), 250,
                                   (0.7, 1.0, 0.0, 0.0), 0.1)
        m = lr_fit(corpus, 100.0, [400.0])
        ratios = [math.log(c.count_at(400.0) / c.count_at(100.0))
                  for c in corpus]
        se = np.std(ratios, ddof=1) / math.sqrt(len(corpus))
        assert abs(m.alpha[0] - 0.7) <= se

        # follower-featured regression with planted coefficients
        coef = (0.7, 1.0, 0.02, 0.01)
        corpus = _loglinear_corpus(np.random.default_rng(0), 250, coef, 0.1)
        m = lrn_fit(corpus, 100.0, [400.0])
        X = np.array([[1.0, math.log(c.count_at(100.0)),
                       math.log(c.follower_sum_at(100.0)),
                       math.log(c.followers[0])] for c in corpus])
        Y = np.array([math.log(c.count_at(400.0)) for c in corpus])
        fitted = np.array([m.alpha[0], *m.beta[0]])
        resid = Y - X @ fitted
        s2 = resid @ resid / (len(Y) - 4)
        ses = np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X)))
        assert np.all(np.abs(fitted - np.array(coef)) <= ses)

        # with nothing in the trailing estimation window the final-count
        # estimator must return the observed count exactly
        quiet = Cascade("quiet", [0.0, 100.0, 200.0, 300.0], [900, 5, 5, 5])
        assert seismic_predict_final(quiet, T=7200.0, k=kernel) == 3.0


def test_c7_method_ordering(circadian_corpus_50):
    with criterion(7, "time-dependent rate beats constant rate"):
        medians = {}
        for method in ("tideh_untrained", "hawkes_const"):
            cfg = ExperimentConfig(method=method, T=24 * 3600.0,
                                   delta_pred=4 * 3600.0, T_max=72 * 3600.0,
                                   folds=2, popularity_threshold=0)
            res = run_experiment(cfg, circadian_corpus_50)
            assert res.aggregates["n_ok"] == 50
            medians[method] = res.aggregates["median_eps_a"]
        assert medians["tideh_untrained"] < medians["hawkes_const"]


@pytest.mark.skipif("TIDEH_DATA_DIR" not in os.environ,
                    reason="benchmarks tied to the original evaluation "
                           "corpus; set TIDEH_DATA_DIR to run")
def test_c8_dataset_benchmarks():
    """Reference error magnitudes reported for the original corpus."""
    with criterion(8, "dataset benchmark magnitudes"):
        corpus = load_corpus()
        results = {}
        for method in ("tideh_trained", "rpp", "seismic_final"):
            for T_h in (1.0, 24.0):
                cfg = ExperimentConfig(method=method, T=T_h * 3600.0,
                                       delta_pred=4 * 3600.0,
                                       T_max=168 * 3600.0, folds=5,
                                       popularity_threshold=2000, seed=1)
                results[method, T_h] = run_experiment(cfg, corpus).aggregates

        med_1h = results["tideh_trained", 1.0]["median_eps_a"]
        med_24h = results["tideh_trained", 24.0]["median_eps_a"]
        assert med_1h == pytest.approx(8.2, rel=0.30)
        assert med_24h == pytest.approx(1.6, rel=0.30)

        for key, target in (("mean_eps_a", 0.179), ("median_eps_a", 0.217)):
            ours = results["tideh_trained", 24.0][key]
            other = results["rpp", 24.0][key]
            improvement = (other - ours) / other
            assert abs(improvement - target) <= 0.10

        ours = results["tideh_trained", 24.0]["median_final_abs_err"]
        for method in ("seismic_final", "rpp"):
            other = results[method, 24.0]["median_final_abs_err"]
            improvement = (other - ours) / other
            assert abs(improvement - 0.30) <= 0.15


def test_c9_determinism(tmp_path, circadian_corpus_50):
    # the fold-leak assertions inside run_experiment are armed on every
    # trained run in this suite; any leak would have failed those tests
    with criterion(9, "seeded runs are byte-identical"):
        subset = circadian_corpus_50[:12]
        for method, seed in (("lr", 17), ("tideh_untrained", None)):
            outs = []
            for tag in ("a", "b"):
                out = tmp_path / f"{method}-{tag}"
                cfg = ExperimentConfig(method=method, T=6 * 3600.0,
                                       delta_pred=4 * 3600.0,
                                       T_max=72 * 3600.0, folds=3,
                                       popularity_threshold=0, seed=seed,
                                       out_dir=str(out))
                run_experiment(cfg, subset)
                outs.append(out)
            for name in ("records.csv", "summary.json"):
                assert ((outs[0] / name).read_bytes()
                        == (outs[1] / name).read_bytes())
