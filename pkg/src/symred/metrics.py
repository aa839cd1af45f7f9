"""Scoring and aggregation primitives shared by all learners and the harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_vector

__all__ = ["ScoreSummary", "pearson_r2", "summarize"]


@dataclass(frozen=True)
class ScoreSummary:
    """Median and interquartile range of a batch of scores."""

    median: float
    iqr: float
    n_runs: int


def pearson_r2(pred, actual) -> float:
    """Squared Pearson correlation between predictions and actuals.

    Returns a value in [0, 1]. If either vector has zero variance the
    correlation is undefined and the score is 0 by convention (same rule the
    GP fitness uses for constant predictions). The score is invariant under
    affine transforms of either argument with nonzero slope.
    """
    pred = check_vector(pred, "pred")
    actual = check_vector(actual, "actual", length=pred.shape[0])
    if pred.shape[0] < 2:
        raise ValueError("pearson_r2 requires at least 2 observations")
    pc = pred - pred.mean()
    ac = actual - actual.mean()
    var_p = float(pc @ pc)
    var_a = float(ac @ ac)
    if var_p <= 0.0 or var_a <= 0.0:
        return 0.0
    cov = float(pc @ ac)
    r2 = (cov * cov) / (var_p * var_a)
    if not np.isfinite(r2):
        return 0.0
    return float(min(max(r2, 0.0), 1.0))


def summarize(scores) -> ScoreSummary:
    """Median and IQR of ``scores``.

    The median of an even-sized sample is the mean of the two middle values.
    Quartiles use linear interpolation between order statistics (the rank is
    ``(n - 1) * q``, fractional ranks interpolate between neighbours), so for
    scores 1..10 the IQR is 7.75 - 3.25 = 4.5.
    """
    scores = check_vector(scores, "scores")
    if scores.shape[0] == 0:
        raise ValueError("summarize requires at least one score")
    q1, med, q3 = np.percentile(scores, [25.0, 50.0, 75.0], method="linear")
    return ScoreSummary(median=float(med), iqr=float(q3 - q1), n_runs=scores.shape[0])
