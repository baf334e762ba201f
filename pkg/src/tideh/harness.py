"""Experiment harness: corpus I/O, per-method evaluation and comparison.

A corpus is a directory of plain-text cascade files (one ``time_seconds
follower_count`` pair per line, origin first at offset 0) plus an
``index.txt`` naming the cascade ids.  ``run_experiment`` evaluates one
method over a corpus under a fixed observation/prediction setting and
writes a per-cascade CSV plus a JSON summary embedding the full config, so
a result is reproducible from its own artefacts.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cascade import Cascade, InfectiousRateParams, KernelParams
from .errors import CascadeFormatError, ConfigMismatchError
from .estimate import (
    DEFAULT_DELTA_OBS,
    fit_amplitude,
    fit_constant,
    fit_full,
    rate_profile,
    train_shape,
)
from .baselines import (
    SeismicParams,
    lr_fit,
    lr_predict,
    lrn_fit,
    lrn_predict,
    rpp_fit,
    rpp_predict,
    seismic_predict_final,
)
from .metrics import error_per_hour, observed_activity
from .predict import (
    DEFAULT_STEP,
    DEFAULT_T_MAX,
    prediction_bin_edges,
    predict_activity,
    predict_final,
    solve_volterra,
)

__all__ = [
    "METHODS",
    "TRAINED_METHODS",
    "DATA_DIR_ENV",
    "ExperimentConfig",
    "CascadeRecord",
    "EvalResult",
    "load_cascade",
    "save_cascade",
    "load_corpus",
    "save_corpus",
    "assign_folds",
    "run_experiment",
    "compare_methods",
    "comparison_to_csv",
]

METHODS = ("tideh_trained", "tideh_untrained", "hawkes_const", "lr", "lrn",
           "rpp", "seismic_final")
TRAINED_METHODS = ("tideh_trained", "lr", "lrn")
DATA_DIR_ENV = "TIDEH_DATA_DIR"

MEDIAN_CONVENTION = "even count: mean of the two middle order statistics"


# ---------------------------------------------------------------------------
# Corpus I/O

def load_cascade(path) -> Cascade:
    """Parse one cascade file; the id is the file stem."""
    path = Path(path)
    times, followers = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise CascadeFormatError(
                    f"{path}:{lineno}: expected 'time_seconds follower_count'"
                )
            try:
                t = float(parts[0])
                d = int(parts[1])
            except ValueError as exc:
                raise CascadeFormatError(f"{path}:{lineno}: {exc}") from exc
            if t < 0:
                raise CascadeFormatError(f"{path}:{lineno}: negative time")
            if d < 0:
                raise CascadeFormatError(f"{path}:{lineno}: negative followers")
            times.append(t)
            followers.append(d)
    if not times:
        raise CascadeFormatError(f"{path}: empty file has no origin row")
    order = np.argsort(times, kind="stable")
    if not np.array_equal(order, np.arange(len(times))):
        warnings.warn(f"{path}: event times out of order; sorting")
        times = [times[i] for i in order]
        followers = [followers[i] for i in order]
    if times[0] != 0.0:
        raise CascadeFormatError(f"{path}: first event must be the origin at 0")
    return Cascade(path.stem, times, followers)


def save_cascade(c: Cascade, path) -> None:
    """Write a cascade in the two-column text format (full float precision)."""
    with open(path, "w") as fh:
        for t, d in zip(c.times, c.followers):
            fh.write(f"{float(t)!r} {int(d)}\n")


def save_corpus(cascades, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "index.txt", "w") as fh:
        for c in cascades:
            fh.write(c.id + "\n")
    for c in cascades:
        save_cascade(c, root / f"{c.id}.txt")


def load_corpus(root=None) -> list[Cascade]:
    """Load all cascades named by ``index.txt`` under ``root``.

    Falls back to the TIDEH_DATA_DIR environment variable when ``root`` is
    not given.
    """
    if root is None:
        root = os.environ.get(DATA_DIR_ENV)
        if not root:
            raise ValueError(f"no corpus directory given and {DATA_DIR_ENV} unset")
    root = Path(root)
    index = root / "index.txt"
    if not index.is_file():
        raise CascadeFormatError(f"{index}: corpus index not found")
    out = []
    with open(index) as fh:
        for line in fh:
            cid = line.strip()
            if cid:
                out.append(load_cascade(root / f"{cid}.txt"))
    return out


# ---------------------------------------------------------------------------
# Configuration and results

@dataclass(frozen=True)
class ExperimentConfig:
    """One evaluation setting: a method plus the shared pipeline knobs."""

    method: str
    T: float
    delta_pred: float
    delta_obs: float = DEFAULT_DELTA_OBS
    T_max: float = DEFAULT_T_MAX
    folds: int = 5
    popularity_threshold: int = 2000
    seed: int | None = None
    step: float = DEFAULT_STEP
    rpp_epsilon: float = 0.1
    seismic_window: float = 3600.0
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not 0 < self.T < self.T_max:
            raise ValueError("need 0 < T < T_max")
        if not self.delta_pred > 0 or not self.delta_obs > 0:
            raise ValueError("bin widths must be positive")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.method in TRAINED_METHODS and self.seed is None:
            raise ValueError(f"method {self.method!r} trains on folds; a seed "
                             "is required for a reproducible split")

    def to_dict(self) -> dict:
        """Config as a JSON-safe dict (output location excluded)."""
        return {
            "method": self.method,
            "T": self.T,
            "delta_pred": self.delta_pred,
            "delta_obs": self.delta_obs,
            "T_max": self.T_max,
            "folds": self.folds,
            "popularity_threshold": self.popularity_threshold,
            "seed": self.seed,
            "step": self.step,
            "rpp_epsilon": self.rpp_epsilon,
            "seismic_window": self.seismic_window,
        }


@dataclass
class CascadeRecord:
    cascade_id: str
    fold: int
    status: str
    n_obs: int
    final_actual: int
    eps_a: float | None = None
    final_pred: float | None = None
    pred_activity: np.ndarray | None = None
    actual_activity: np.ndarray | None = None


def _median(values) -> float:
    """Median; an even count averages the two middle order statistics."""
    v = sorted(values)
    n = len(v)
    if n == 0:
        raise ValueError("median of empty sequence")
    mid = n // 2
    if n % 2:
        return float(v[mid])
    return 0.5 * (float(v[mid - 1]) + float(v[mid]))


def _aggregate(records) -> tuple[dict, dict]:
    ok = [r for r in records if r.status == "ok"]
    eps = [r.eps_a for r in ok if r.eps_a is not None]
    fin = [abs(r.final_pred - r.final_actual) for r in ok
           if r.final_pred is not None]
    agg = {
        "n_records": len(records),
        "n_ok": len(ok),
        "mean_eps_a": float(np.mean(eps)) if eps else None,
        "median_eps_a": _median(eps) if eps else None,
        "mean_final_abs_err": float(np.mean(fin)) if fin else None,
        "median_final_abs_err": _median(fin) if fin else None,
    }
    exclusions: dict[str, int] = {}
    for r in records:
        if r.status != "ok":
            exclusions[r.status] = exclusions.get(r.status, 0) + 1
    return agg, exclusions


def _fmt(x) -> str:
    return "" if x is None else f"{x:.10g}"


def _fmt_series(a) -> str:
    return "" if a is None else ";".join(f"{v:.10g}" for v in a)


@dataclass
class EvalResult:
    """Per-cascade records plus aggregates for one (method, setting) run."""

    config: dict
    records: list
    aggregates: dict = field(default_factory=dict)
    exclusions: dict = field(default_factory=dict)

    CSV_HEADER = ("cascade_id,fold,status,n_obs,eps_a,final_pred,"
                  "final_actual,pred_activity,actual_activity")

    def save(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "records.csv", "w") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for r in self.records:
                fh.write(",".join([
                    r.cascade_id,
                    str(r.fold),
                    r.status,
                    str(r.n_obs),
                    _fmt(r.eps_a),
                    _fmt(r.final_pred),
                    str(r.final_actual),
                    _fmt_series(r.pred_activity),
                    _fmt_series(r.actual_activity),
                ]) + "\n")
        summary = {
            "schema": 1,
            "config": self.config,
            "aggregates": self.aggregates,
            "exclusions": self.exclusions,
            "median_convention": MEDIAN_CONVENTION,
        }
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, out_dir) -> "EvalResult":
        """Reload a saved result, recomputing aggregates as a consistency check."""
        out_dir = Path(out_dir)
        with open(out_dir / "summary.json") as fh:
            summary = json.load(fh)
        if summary.get("schema") != 1:
            raise ValueError(f"unsupported result schema {summary.get('schema')!r}")
        records = []
        with open(out_dir / "records.csv") as fh:
            header = fh.readline().rstrip("\n")
            if header != cls.CSV_HEADER:
                raise ValueError("unexpected records.csv header")
            for line in fh:
                (cid, fold, status, n_obs, eps, fpred, factual, pact,
                 aact) = line.rstrip("\n").split(",")
                records.append(CascadeRecord(
                    cascade_id=cid,
                    fold=int(fold),
                    status=status,
                    n_obs=int(n_obs),
                    final_actual=int(factual),
                    eps_a=float(eps) if eps else None,
                    final_pred=float(fpred) if fpred else None,
                    pred_activity=(np.array([float(v) for v in pact.split(";")])
                                   if pact else None),
                    actual_activity=(np.array([float(v) for v in aact.split(";")])
                                     if aact else None),
                ))
        agg, excl = _aggregate(records)
        stored = summary["aggregates"]
        for key, val in agg.items():
            sval = stored.get(key)
            # records carry 10 significant digits; |pred - actual| can
            # amplify that rounding by orders of magnitude, so the match is
            # checked against the serialization precision, not float64's
            same = (val is None and sval is None) or (
                val is not None and sval is not None
                and math.isclose(val, sval, rel_tol=1e-6, abs_tol=1e-9)
            )
            if not same:
                raise ValueError(
                    f"stored aggregate {key}={sval!r} does not match "
                    f"records ({val!r})"
                )
        if excl != summary["exclusions"]:
            raise ValueError("stored exclusions do not match records")
        return cls(config=summary["config"], records=records, aggregates=agg,
                   exclusions=excl)


# ---------------------------------------------------------------------------
# Evaluation pipelines

def assign_folds(ids, n_folds: int, seed) -> dict[str, int]:
    """Deterministic shuffled round-robin fold assignment keyed by id."""
    ids = sorted(ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    folds = {}
    for pos, idx in enumerate(order):
        folds[ids[idx]] = pos % n_folds
    return folds


def _tideh_forecast(c: Cascade, rate: InfectiousRateParams,
                    cfg: ExperimentConfig, k: KernelParams):
    prefix = c.prefix(cfg.T)
    fc = solve_volterra(prefix, rate, k, cfg.T, cfg.T_max, cfg.step)
    return predict_activity(fc, cfg.delta_pred), predict_final(c, fc)


def _activity_from_counts(count_at_edges, r_T) -> np.ndarray:
    prev = np.concatenate(([r_T], count_at_edges[:-1]))
    return np.asarray(count_at_edges) - prev


def _predict_one(cfg: ExperimentConfig, c: Cascade, ctx, k: KernelParams):
    """Return (pred_activity | None, final_pred) for one cascade."""
    prefix = c.prefix(cfg.T)
    if cfg.method == "tideh_untrained":
        prof = rate_profile(prefix, cfg.T, min(cfg.delta_obs, cfg.T), k)
        rate = fit_full(prof).params
        return _tideh_forecast(c, rate, cfg, k)
    if cfg.method == "tideh_trained":
        prof = rate_profile(prefix, cfg.T, min(cfg.delta_obs, cfg.T), k)
        p0 = fit_amplitude(prof, (ctx.r0, ctx.phi0, ctx.tau_m))
        rate = InfectiousRateParams(p0=p0, r0=ctx.r0, phi0=ctx.phi0,
                                    tau_m=ctx.tau_m)
        return _tideh_forecast(c, rate, cfg, k)
    if cfg.method == "hawkes_const":
        rate = InfectiousRateParams.constant(fit_constant(prefix, cfg.T, k))
        return _tideh_forecast(c, rate, cfg, k)
    edges = prediction_bin_edges(cfg.T, cfg.T_max, cfg.delta_pred)[1:]
    r_T = c.count_at(cfg.T)
    if cfg.method == "lr":
        if r_T < 1:
            raise ValueError("no re-shares observed by T")
        counts = np.array([lr_predict(ctx, r_T, t) for t in edges])
        return _activity_from_counts(counts, r_T), float(counts[-1])
    if cfg.method == "lrn":
        d_T = c.follower_sum_at(cfg.T)
        d0 = int(c.followers[0])
        if r_T < 1 or d_T < 1 or d0 < 1:
            raise ValueError("zero feature (R(T), D(T) or d0)")
        counts = np.array([lrn_predict(ctx, r_T, d_T, d0, t) for t in edges])
        return _activity_from_counts(counts, r_T), float(counts[-1])
    if cfg.method == "rpp":
        model = rpp_fit(prefix, cfg.T, epsilon=cfg.rpp_epsilon)
        counts = rpp_predict(model, r_T, cfg.T, edges)
        return _activity_from_counts(counts, r_T), float(counts[-1])
    if cfg.method == "seismic_final":
        sp = SeismicParams(estimator_window=cfg.seismic_window)
        return None, seismic_predict_final(c, cfg.T, sp, k)
    raise ValueError(f"unknown method {cfg.method!r}")


def _evaluate_one(cfg: ExperimentConfig, c: Cascade, fold: int, ctx,
                  k: KernelParams) -> CascadeRecord:
    rec = CascadeRecord(
        cascade_id=c.id,
        fold=fold,
        status="ok",
        n_obs=c.count_at(cfg.T),
        final_actual=c.count_at(cfg.T_max),
    )
    try:
        pred, final = _predict_one(cfg, c, ctx, k)
    except ValueError as exc:  # every pipeline error derives from ValueError
        rec.status = type(exc).__name__
        return rec
    rec.final_pred = float(final)
    if pred is not None:
        actual = observed_activity(c, cfg.T, cfg.T_max, cfg.delta_pred)
        rec.pred_activity = np.asarray(pred, dtype=float)
        rec.actual_activity = actual
        rec.eps_a = error_per_hour(pred, actual, cfg.T, cfg.T_max)
    return rec


def _train_context(cfg: ExperimentConfig, train, k: KernelParams):
    if cfg.method == "tideh_trained":
        return train_shape(train, cfg.T, cfg.delta_pred, cfg.T_max, k,
                           cfg.delta_obs, cfg.step)
    targets = prediction_bin_edges(cfg.T, cfg.T_max, cfg.delta_pred)[1:]
    if cfg.method == "lr":
        return lr_fit(train, cfg.T, targets)
    if cfg.method == "lrn":
        return lrn_fit(train, cfg.T, targets)
    return None


def run_experiment(cfg: ExperimentConfig, corpus,
                   k: KernelParams = KernelParams()) -> EvalResult:
    """Evaluate one method over a corpus; returns (and optionally writes) results.

    Trained methods use held-out folds: the shape/regression context is
    fitted on the other folds, never on the cascade being scored.  Cascades
    whose pipeline raises are recorded with the error name and excluded from
    aggregates.  Everything downstream of (config, corpus) is deterministic.
    """
    eligible = [c for c in corpus if len(c) - 1 >= cfg.popularity_threshold]
    if not eligible:
        raise ValueError("no cascades pass the popularity threshold")
    ids = [c.id for c in eligible]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate cascade ids in corpus")
    folds = assign_folds(ids, cfg.folds, cfg.seed if cfg.seed is not None else 0)

    records = []
    if cfg.method in TRAINED_METHODS:
        seen = set()
        for f in range(cfg.folds):
            test = [c for c in eligible if folds[c.id] == f]
            train = [c for c in eligible if folds[c.id] != f]
            if not test:
                continue
            test_ids = {c.id for c in test}
            train_ids = {c.id for c in train}
            assert not (test_ids & train_ids), "fold leak: id in train and test"
            assert not (test_ids & seen), "fold leak: id evaluated twice"
            seen |= test_ids
            try:
                ctx = _train_context(cfg, train, k)
            except ValueError as exc:
                for c in test:
                    records.append(CascadeRecord(
                        cascade_id=c.id, fold=f, status=type(exc).__name__,
                        n_obs=c.count_at(cfg.T),
                        final_actual=c.count_at(cfg.T_max)))
                continue
            for c in test:
                records.append(_evaluate_one(cfg, c, f, ctx, k))
        assert seen == set(ids), "every eligible cascade must be scored once"
    else:
        for c in eligible:
            records.append(_evaluate_one(cfg, c, folds[c.id], None, k))

    agg, excl = _aggregate(records)
    result = EvalResult(config=cfg.to_dict(), records=records, aggregates=agg,
                        exclusions=excl)
    if cfg.out_dir is not None:
        result.save(cfg.out_dir)
    return result


# ---------------------------------------------------------------------------
# Method comparison

_SWEEP_KEYS = ("method", "T", "delta_pred")


def compare_methods(results) -> list[dict]:
    """Mean/median error per method per (T, delta_pred) sweep point.

    All results must share the non-sweep configuration.  Relative
    improvements are reported against the trained variant when present,
    otherwise the untrained one: (other - reference) / other.
    """
    if not results:
        raise ValueError("nothing to compare")
    base = {key: val for key, val in results[0].config.items()
            if key not in _SWEEP_KEYS}
    for res in results[1:]:
        other = {key: val for key, val in res.config.items()
                 if key not in _SWEEP_KEYS}
        if other != base:
            diff = {key for key in base if base[key] != other.get(key)}
            raise ConfigMismatchError(
                f"results differ beyond method/sweep: {sorted(diff)}"
            )

    groups: dict[tuple, list] = {}
    for res in results:
        point = (res.config["T"], res.config["delta_pred"])
        groups.setdefault(point, []).append(res)

    rows = []
    for point in sorted(groups):
        members = groups[point]
        ref = None
        for name in ("tideh_trained", "tideh_untrained"):
            ref = next((r for r in members if r.config["method"] == name), ref)
            if ref is not None and ref.config["method"] == name:
                break
        for res in sorted(members, key=lambda r: r.config["method"]):
            agg = res.aggregates
            row = {
                "method": res.config["method"],
                "T": point[0],
                "delta_pred": point[1],
                "n_ok": agg["n_ok"],
                "mean_eps_a": agg["mean_eps_a"],
                "median_eps_a": agg["median_eps_a"],
                "mean_final_abs_err": agg["mean_final_abs_err"],
                "median_final_abs_err": agg["median_final_abs_err"],
            }
            for metric in ("mean_eps_a", "median_eps_a", "mean_final_abs_err",
                           "median_final_abs_err"):
                key = f"{metric}_improvement_vs_ref"
                row[key] = None
                if ref is not None and ref is not res:
                    other_val = agg[metric]
                    ref_val = ref.aggregates[metric]
                    if other_val not in (None, 0) and ref_val is not None:
                        row[key] = (other_val - ref_val) / other_val
            rows.append(row)
    return rows


def comparison_to_csv(rows, path) -> None:
    if not rows:
        raise ValueError("empty comparison")
    cols = list(rows[0].keys())
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for col in cols:
                val = row[col]
                if val is None:
                    out.append("")
                elif isinstance(val, float):
                    out.append(f"{val:.10g}")
                else:
                    out.append(str(val))
            fh.write(",".join(out) + "\n")
