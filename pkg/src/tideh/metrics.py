"""Evaluation metric and observed-activity binning shared across modules."""

from __future__ import annotations

import numpy as np

from .cascade import HOUR_SECONDS, Cascade
from .errors import BinMismatchError
from .predict import prediction_bin_edges

__all__ = ["observed_activity", "error_per_hour"]


def observed_activity(c: Cascade, T: float, T_max: float,
                      delta_pred: float) -> np.ndarray:
    """Actual event counts per prediction bin (a, b] over (T, T_max]."""
    edges = prediction_bin_edges(T, T_max, delta_pred)
    cum = np.searchsorted(c.times, edges, side="right")
    return np.diff(cum).astype(float)


def error_per_hour(pred, actual, T: float, T_max: float) -> float:
    """Mean absolute activity error per hour of prediction horizon.

    sum_k |pred_k - actual_k| divided by (T_max - T) in hours; the truncated
    final bin simply contributes its count error over its shorter width.
    """
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise BinMismatchError(
            f"predicted ({pred.shape}) and actual ({actual.shape}) series differ"
        )
    if not T_max > T:
        raise ValueError("T_max must exceed T")
    hours = (T_max - T) / HOUR_SECONDS
    return float(np.abs(pred - actual).sum() / hours)
