"""Discrimination metrics: Gini and lift."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata


class MetricError(ValueError):
    """Raised when a metric is undefined for the given input."""


def _check(predictions, outcomes):
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(outcomes)
    if p.shape != y.shape or p.ndim != 1:
        raise MetricError("predictions and outcomes must be 1-D arrays of equal length")
    y = y.astype(bool)
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise MetricError("Gini is undefined without both positive and negative outcomes")
    return p, y, n1, n0


def concordance(predictions, outcomes) -> float:
    """Number of (positive, negative) pairs ranked correctly, ties counting one half.

    Computed from average ranks; the result is an exact multiple of 0.5.
    """
    p, y, n1, _ = _check(predictions, outcomes)
    ranks = rankdata(p, method="average")
    return float(ranks[y].sum()) - n1 * (n1 + 1) / 2.0


def gini(predictions, outcomes) -> float:
    """Gini = 2 * AUC - 1 for predictions where higher means riskier.

    Example:
        >>> gini([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        0.5
    """
    _, _, n1, n0 = _check(predictions, outcomes)
    return 2.0 * concordance(predictions, outcomes) / (n1 * n0) - 1.0


def lift(predictions, outcomes, percentile: float) -> float:
    """Bad rate among the worst-scored ``percentile`` % of rows over the overall bad rate.

    The bucket holds the ``ceil(n * percentile / 100)`` rows with the highest
    predictions; ties at the boundary are broken by row order.
    """
    p, y, _, _ = _check(predictions, outcomes)
    if not (0 < percentile <= 100):
        raise MetricError("percentile must lie in (0, 100]")
    k = math.ceil(len(p) * percentile / 100.0)
    if k == 0:
        raise MetricError("empty percentile bucket")
    order = np.argsort(-p, kind="stable")
    return float(y[order[:k]].mean() / y.mean())


def lift_table(predictions, outcomes, percentiles=(1, 5, 10, 20)) -> dict:
    return {pct: lift(predictions, outcomes, pct) for pct in percentiles}
